"""End-to-end CLI behavior: output contracts and exit codes."""

import json

import numpy as np
import pytest

from signalvuln.cli import build_parser, main
from signalvuln.fixtures import example_network_path
from signalvuln.network import load_network, save_network


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture(scope="module")
def paths(tmp_path_factory, example):
    """Network files used across the module: nominal, doubled, zero, broken."""
    root = tmp_path_factory.mktemp("nets")
    net, flows = example
    out = {"nominal": str(example_network_path())}
    for name, fl in (
        ("doubled", flows.scaled(2.0)),
        ("zero", flows.scaled(0.0)),
        ("skewed", flows.replace(net.movement_pos(3, 14), 7.0)),
    ):
        p = root / f"{name}.net"
        save_network(net, fl, str(p))
        out[name] = str(p)
    return out


def _spec(tmp_path, **doc):
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(doc))
    return str(p)


# ----------------------------------------------------------------------
# validate


def test_validate_ok(capsys, paths):
    code, out, _ = run(capsys, "validate", paths["nominal"])
    assert code == 0
    assert out == "ok: 14 links, 2 intersections, 16 movements\n"


def test_validate_conservation_violation(capsys, paths):
    code, out, _ = run(capsys, "validate", paths["skewed"])
    assert code == 1
    assert (
        "conservation violated on link 14: inflow 11 != outflow 12 (magnitude 1)"
        in out
    )
    code, _, _ = run(capsys, "validate", paths["skewed"], "--tol", "2.0")
    assert code == 0


def test_validate_structural_error(capsys, tmp_path, paths):
    doc = json.loads(open(paths["nominal"]).read())
    doc["movements"][0]["saturation"] = 0
    bad = tmp_path / "bad.net"
    bad.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "validate", str(bad))
    assert code == 1
    assert "nonpositive saturation" in out


def test_validate_input_errors(capsys, tmp_path):
    code, _, err = run(capsys, "validate", str(tmp_path / "nope.net"))
    assert code == 2
    assert err.startswith("error:")
    garbled = tmp_path / "garbled.net"
    garbled.write_text("{oops")
    code, _, err = run(capsys, "validate", str(garbled))
    assert code == 2


# ----------------------------------------------------------------------
# schedule


def test_schedule_output(capsys, paths, tmp_path):
    csv_file = tmp_path / "stages.csv"
    code, out, _ = run(capsys, "schedule", paths["nominal"], "--csv", str(csv_file))
    assert code == 0
    assert "intersection,stage,duration" in out
    assert "intersection 1: sum lambda = 0.5625" in out
    assert "intersection 2: sum lambda = 0.75" in out
    assert "T = 4.000000 * tau" in out
    saved = csv_file.read_text()
    assert saved.startswith("intersection,stage,duration\n")
    assert saved in out


def test_schedule_lost_time_flag(capsys, paths):
    code, out, _ = run(capsys, "schedule", paths["nominal"], "--lost-time", "2.5")
    assert code == 0
    assert "T = 10.000000 * tau" in out


def test_schedule_infeasible(capsys, paths):
    code, out, _ = run(capsys, "schedule", paths["doubled"])
    assert code == 1
    assert "INFEASIBLE (sum lambda = 1.5)" in out
    assert "T =" not in out


def test_schedule_zero_demand(capsys, paths):
    code, out, _ = run(capsys, "schedule", paths["zero"])
    assert code == 0
    assert "T = 1.000000 * tau" in out


# ----------------------------------------------------------------------
# attack


def test_attack_with_oracle(capsys, paths):
    code, out, _ = run(
        capsys, "attack", paths["nominal"],
        "--kind", "worst-network", "--budget", "1", "--oracle",
    )
    assert code == 0
    assert "status: OPTIMAL" in out
    assert "objective = 2.000000" in out
    assert "compromised sensors: [(3,6)]" in out
    assert "f(3,6): 4 -> 0" in out
    assert "milp objective = 2.000000" in out
    assert "oracle objective = 2.000000" in out
    gap = float(next(l for l in out.splitlines() if l.startswith("gap = ")).split("=")[1])
    assert gap <= 1e-6


def test_attack_budget_too_large(capsys, paths):
    code, _, err = run(
        capsys, "attack", paths["nominal"],
        "--kind", "worst-network", "--budget", "17",
    )
    assert code == 2
    assert "budget 17 exceeds sensor count 16" in err


def test_attack_needs_kind_or_spec(capsys, paths):
    code, _, err = run(capsys, "attack", paths["nominal"])
    assert code == 2
    assert "need --spec FILE or --kind" in err


def test_attack_infeasible_spec(capsys, paths, tmp_path):
    spec = _spec(
        tmp_path, kind="risk-averse", budget=2,
        targets=[{"from": 3, "to": 6, "alpha": -1.0}],
    )
    code, out, _ = run(capsys, "attack", paths["nominal"], "--spec", spec)
    assert code == 1
    assert "INFEASIBLE: no falsification satisfies" in out


def test_attack_node_limit_still_reports(capsys, paths, tmp_path):
    out_dir = tmp_path / "report"
    code, out, _ = run(
        capsys, "attack", paths["nominal"],
        "--kind", "worst-network", "--budget", "2",
        "--node-limit", "1", "--out", str(out_dir),
    )
    assert code == 3
    assert "status: BUDGET_EXCEEDED" in out
    assert (out_dir / "sweep.csv").exists()
    assert (out_dir / "accumulation.csv").exists()
    assert (out_dir / "heatmap.csv").exists()


def test_attack_spec_budget_override(capsys, paths, tmp_path):
    spec = _spec(tmp_path, kind="worst-network", budget=2)
    code, out, _ = run(
        capsys, "attack", paths["nominal"], "--spec", spec, "--budget", "0"
    )
    assert code == 0
    assert "objective = 0.000000" in out


# ----------------------------------------------------------------------
# sweep


def test_sweep_writes_report(capsys, paths, tmp_path):
    out_dir = tmp_path / "sweep"
    code, out, _ = run(
        capsys, "sweep", paths["nominal"], "--b-max", "2", "--out", str(out_dir)
    )
    assert code == 0
    assert "B=0: objective = 0.000000, nv = 0.000000" in out
    assert "B=1: objective = 2.000000, nv = 0.034483" in out
    assert "B=2: objective = 6.000000, nv = 0.103448" in out
    rows = open(out_dir / "sweep.csv").read().splitlines()
    assert rows[0] == "budget,objective,nv"
    objs = [float(r.split(",")[1]) for r in rows[1:]]
    assert objs == sorted(objs) and len(objs) == 3


def test_sweep_parallel(capsys, paths):
    code, out, _ = run(
        capsys, "sweep", paths["nominal"], "--b-max", "1", "--workers", "2"
    )
    assert code == 0
    assert "B=1: objective = 2.000000" in out


def test_sweep_budget_cap(capsys, paths):
    code, _, err = run(capsys, "sweep", paths["nominal"], "--b-max", "17")
    assert code == 2
    assert "exceeds the 16 sensors" in err


def test_config_rejections(capsys, paths):
    code, _, err = run(
        capsys, "sweep", paths["nominal"], "--b-max", "1", "--workers", "0"
    )
    assert code == 2 and "--workers must be >= 1" in err
    code, _, err = run(
        capsys, "sweep", paths["nominal"], "--b-max", "1", "--gap-tol", "-1"
    )
    assert code == 2 and "tolerances must be positive" in err
    code, _, err = run(
        capsys, "attack", paths["nominal"], "--kind", "worst-network",
        "--node-limit", "0",
    )
    assert code == 2 and "--node-limit must be >= 1" in err


# ----------------------------------------------------------------------
# simulate


def test_simulate_nominal(capsys, paths):
    code, out, _ = run(capsys, "simulate", paths["nominal"], "--periods", "20")
    assert code == 0
    lines = [l for l in out.splitlines() if l.startswith("q(")]
    assert len(lines) == 16
    assert all(l.endswith("= 0") for l in lines)


def test_simulate_attacked(capsys, paths, tmp_path):
    spec = _spec(tmp_path, kind="worst-network", budget=1)
    out_dir = tmp_path / "sim"
    code, out, _ = run(
        capsys, "simulate", paths["nominal"], "--attack", spec,
        "--out", str(out_dir),
    )
    assert code == 0
    assert "q(3,6) = 200" in out
    heat = (out_dir / "heatmap.csv").read_text().splitlines()
    assert heat[0] == "link,intensity"
    assert len(heat) == 15


# ----------------------------------------------------------------------
# gen-grid and parser plumbing


def test_gen_grid_round_trip(capsys, tmp_path):
    out_file = tmp_path / "grid.net"
    code, out, _ = run(capsys, "gen-grid", "2", "2", "--seed", "3",
                       "--out", str(out_file))
    assert code == 0
    assert out.startswith("wrote ")
    net, flows = load_network(str(out_file))
    assert len(net.intersections) == 4
    assert np.all(flows.values >= 0)
    code, _, _ = run(capsys, "validate", str(out_file))
    assert code == 0


def test_gen_grid_rejects_bad_dims(capsys, tmp_path):
    code, _, err = run(capsys, "gen-grid", "0", "2",
                       "--out", str(tmp_path / "x.net"))
    assert code == 2
    assert err.startswith("error:")


def test_parser_lists_subcommands():
    text = build_parser().format_help()
    for name in ("validate", "schedule", "attack", "sweep", "simulate", "gen-grid"):
        assert name in text


def test_unknown_kind_exits_two(paths):
    with pytest.raises(SystemExit) as info:
        main(["attack", paths["nominal"], "--kind", "sideways"])
    assert info.value.code == 2
