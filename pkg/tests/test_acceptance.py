"""Acceptance gate: the eight behaviors this package guarantees.

Each test pins one criterion at a fixed tolerance and prints a one-line
summary; run with ``pytest -v tests/test_acceptance.py`` for the
pass/fail line per criterion.
"""

import time

import numpy as np
import pytest

import test_milp
from signalvuln.analysis import (
    budget_sweep,
    network_vulnerability,
    queue_slopes,
    simulate_queues,
)
from signalvuln.attacks import (
    AttackInstance,
    AttackKind,
    AttackTarget,
    brute_force_oracle,
    solve_attack,
    solve_kkt_response,
)
from signalvuln.cli import main as cli_main
from signalvuln.fixtures import example_network_path, random_conservative_flows
from signalvuln.milp import MilpStatus, solve_milp
from signalvuln.scheduling import served_flow, solve_fixed_time

EXPECTED_FRACTIONS = np.array(
    [1 / 4, 1 / 16, 1 / 8, 1 / 8, 1 / 4, 1 / 12, 1 / 4, 1 / 6]
)


@pytest.fixture(scope="module")
def sweep04(example):
    net, flows = example
    return budget_sweep(net, flows, AttackKind.WORST_NETWORK, 4)


def test_criterion_1_schedule_reproduction(example, capsys):
    net, flows = example
    t0 = time.monotonic()
    code = cli_main(["schedule", str(example_network_path())])
    elapsed = time.monotonic() - t0
    out = capsys.readouterr().out
    assert code == 0
    assert "T = 4.000000 * tau" in out
    assert "intersection 1: sum lambda = 0.5625" in out
    assert "intersection 2: sum lambda = 0.75" in out

    sched = solve_fixed_time(net, flows)
    assert np.max(np.abs(sched.stage_fractions - EXPECTED_FRACTIONS)) <= 1e-9
    assert abs(sched.load_of(1) - 0.5625) <= 1e-9
    assert abs(sched.load_of(2) - 0.75) <= 1e-9
    assert elapsed < 1.0
    print(f"criterion 1: PASS schedule reproduced exactly in {elapsed:.3f}s")


def test_criterion_2_small_budget_oracle_equivalence(example):
    net, flows = example
    t0 = time.monotonic()
    values = {}
    for budget in (1, 2):
        instance = AttackInstance(AttackKind.WORST_NETWORK, budget)
        milp = solve_attack(net, flows, instance)
        oracle = brute_force_oracle(net, flows, instance)
        assert milp.status is MilpStatus.OPTIMAL
        assert milp.objective >= oracle.objective - 1e-6
        values[budget] = (milp.objective, oracle.objective)
        if budget == 1:
            assert abs(milp.objective - 2.0) <= 1e-6
            assert abs(oracle.objective - 2.0) <= 1e-6
            assert network_vulnerability(net, flows, milp) == pytest.approx(
                2 / 58, abs=1e-6
            )
    elapsed = time.monotonic() - t0
    assert elapsed < 60.0
    print(
        "criterion 2: PASS milp/oracle "
        + ", ".join(f"B={b}: {m:.6f}/{o:.6f}" for b, (m, o) in values.items())
        + f" in {elapsed:.1f}s"
    )


def test_criterion_3_budget_sweep_trend(example, sweep04):
    net, flows = example
    rows, results = sweep04
    objs = [r.objective for r in rows]
    assert all(r.status is MilpStatus.OPTIMAL for r in rows)
    assert objs == pytest.approx([0.0, 2.0, 6.0, 10.0, 20.0], abs=1e-6)
    for a, b in zip(objs, objs[1:]):
        assert b >= a - 1e-9
    assert all(o > 0 for o in objs[1:])

    nominal = solve_fixed_time(net, flows)
    base_served = served_flow(net, flows, nominal)
    hit_served = served_flow(net, flows, results[4].realized_schedule)
    served_drop = (base_served - hit_served) / base_served
    base_green = float(np.sum(nominal.intersection_loads))
    hit_green = float(np.sum(results[4].realized_schedule.intersection_loads))
    green_drop = (base_green - hit_green) / base_green
    assert served_drop == pytest.approx(20 / 58, abs=1e-6)
    assert green_drop == pytest.approx((1.3125 - 0.875) / 1.3125, abs=1e-6)
    # both service-time readings sit just under the 35% headline damage
    assert 0.30 <= served_drop <= 0.35
    assert green_drop <= 0.35
    print(
        f"criterion 3: PASS sweep {objs}, B=4 damage {objs[4]:.1f} "
        f"(served flow -{served_drop:.1%}, green time -{green_drop:.1%})"
    )


def test_criterion_4_risk_averse_exactness(example):
    net, flows = example
    instance = AttackInstance(
        AttackKind.RISK_AVERSE, budget=1, targets=(AttackTarget(3, 6, 2.0),)
    )
    res = solve_attack(net, flows, instance)
    assert res.status is MilpStatus.OPTIMAL
    assert abs(res.objective - 2.0) <= 1e-6
    assert abs(res.flows.values[net.movement_pos(3, 6)] - 2.0) <= 1e-6
    print(f"criterion 4: PASS minimal deviation {res.objective:.6f}")


def test_criterion_5_inner_response_soundness(example, grid):
    worst = 0.0
    for net, _ in (example, grid):
        for seed in range(100):
            flows = random_conservative_flows(net, seed)
            det = solve_fixed_time(net, flows).intersection_loads
            kkt = solve_kkt_response(net, flows)
            gap = float(np.max(np.abs(kkt - det)))
            worst = max(worst, gap)
            assert gap <= 1e-6, f"seed {seed}: loads differ by {gap:.3e}"
    print(f"criterion 5: PASS 200 random demand draws, worst gap {worst:.2e}")


def test_criterion_6_milp_engine_correctness():
    rng = np.random.default_rng(20250818)
    feasible_count = 0
    for _ in range(50):
        model = test_milp.random_milp(rng)
        feasible, ref = test_milp.enumerate_best(model)
        sol = solve_milp(model)
        if not feasible:
            assert sol.status is MilpStatus.INFEASIBLE
            continue
        assert sol.status is MilpStatus.OPTIMAL
        assert abs(sol.objective - ref) <= 1e-6 * (1.0 + abs(ref))
        feasible_count += 1
    assert feasible_count >= 20
    print(f"criterion 6: PASS 50 instances ({feasible_count} feasible) vs enumeration")


def test_criterion_7_simulator_consistency(example, sweep04):
    net, flows = example
    _, results = sweep04
    checked = 0
    for res in results:
        if res.flows is None:
            continue
        trace = simulate_queues(net, flows, res.realized_schedule, 100)
        slopes = queue_slopes(trace, 50, 100)
        assert np.max(np.abs(slopes - res.accumulation)) <= 1e-6
        checked += 1
    assert checked == 5
    print(f"criterion 7: PASS queue slopes match accumulation on {checked} attacks")


def test_criterion_8_grid_scale_within_time_budget(grid):
    net, flows = grid
    instance = AttackInstance(AttackKind.WORST_NETWORK, budget=5)
    t0 = time.monotonic()
    res = solve_attack(net, flows, instance, time_limit=570.0)
    elapsed = time.monotonic() - t0
    assert elapsed < 600.0
    assert res.status in (MilpStatus.OPTIMAL, MilpStatus.BUDGET_EXCEEDED)
    assert res.objective is not None and res.objective > 0.0
    assert res.bound is not None and np.isfinite(res.bound)
    assert res.bound >= res.objective - 1e-6
    print(
        f"criterion 8: PASS {res.status.name} incumbent {res.objective:.6f}, "
        f"bound {res.bound:.6f}, {res.nodes} nodes, {elapsed:.0f}s"
    )
