"""Vulnerability metrics, budget sweeps, queue simulation, CSV reports."""

import numpy as np
import pytest

import signalvuln.analysis as analysis
from signalvuln.analysis import (
    FrequencyRow,
    SimTrace,
    SweepRow,
    VulnerabilityReport,
    budget_sweep,
    critical_sensors,
    emit_report,
    lane_vulnerability,
    network_vulnerability,
    queue_slopes,
    simulate_queues,
    vulnerability_report,
)
from signalvuln.attacks import AttackInstance, AttackKind, AttackResult, solve_attack
from signalvuln.milp import MilpStatus
from signalvuln.network import (
    FlowMatrix,
    Intersection,
    Link,
    LinkKind,
    Movement,
    RoadNetwork,
    Stage,
)
from signalvuln.scheduling import schedule_from_fractions, solve_fixed_time


@pytest.fixture(scope="module")
def sweep2(example):
    net, flows = example
    return budget_sweep(net, flows, AttackKind.WORST_NETWORK, 2)


def _fork():
    links = (
        Link(1, LinkKind.ENTRY, "1"),
        Link(2, LinkKind.EXIT, "2"),
        Link(3, LinkKind.EXIT, "3"),
    )
    net = RoadNetwork(
        links=links,
        intersections=(Intersection(1, "1"),),
        movements=(Movement(1, 2, 10.0), Movement(1, 3, 10.0)),
        stages=(Stage(1, ((1, 2),)),),
        lost_time=1.0,
        sample_rate=1.0,
    )
    return net, FlowMatrix(np.array([4.0, 1.0]))


def _fake_result(net, flows, objective, compromised=()):
    acc = np.zeros(net.n_movements)
    return AttackResult(
        kind=AttackKind.WORST_NETWORK,
        status=MilpStatus.OPTIMAL,
        objective=objective,
        bound=objective,
        flows=flows,
        compromised=compromised,
        accumulation=acc,
        milp_accumulation=acc,
    )


# ----------------------------------------------------------------------
# scalar metrics


def test_vulnerability_goldens(example):
    net, flows = example
    res = solve_attack(net, flows, AttackInstance(AttackKind.WORST_NETWORK, 1))
    assert network_vulnerability(net, flows, res) == pytest.approx(2 / 58, abs=1e-9)
    assert lane_vulnerability(net, flows, res, 3) == pytest.approx(2 / 12, abs=1e-9)
    # nothing accumulates off the attacked lane
    assert lane_vulnerability(net, flows, res, 1) == pytest.approx(0.0, abs=1e-9)


def test_metric_errors(example):
    net, flows = example
    res = _fake_result(net, flows, 0.0)
    with pytest.raises(ValueError, match="zero total flow"):
        network_vulnerability(net, flows.scaled(0.0), res)
    with pytest.raises(ValueError, match="unknown lane 99"):
        lane_vulnerability(net, flows, res, 99)
    with pytest.raises(ValueError, match="lane 2 has zero outgoing flow"):
        lane_vulnerability(net, flows, res, 2)
    bare = AttackResult(kind=AttackKind.WORST_NETWORK, status=MilpStatus.INFEASIBLE)
    with pytest.raises(ValueError, match="no realized accumulation"):
        network_vulnerability(net, flows, bare)


# ----------------------------------------------------------------------
# budget sweeps


def test_sweep_goldens(sweep2):
    rows, results = sweep2
    assert [r.budget for r in rows] == [0, 1, 2]
    assert [r.status for r in rows] == [MilpStatus.OPTIMAL] * 3
    objs = [r.objective for r in rows]
    assert objs == pytest.approx([0.0, 2.0, 6.0], abs=1e-6)
    assert [r.nv for r in rows] == pytest.approx([0.0, 2 / 58, 6 / 58], abs=1e-6)
    assert all(a <= b + 1e-9 for a, b in zip(objs, objs[1:]))
    assert len(results) == 3 and results[1].flows is not None


def test_sweep_accepts_string_and_template(example):
    net, flows = example
    rows, _ = budget_sweep(net, flows, "worst-network", 1)
    assert rows[1].objective == pytest.approx(2.0, abs=1e-6)
    template = AttackInstance(AttackKind.WORST_NETWORK, budget=99, epsilon=1e-6)
    rows, _ = budget_sweep(net, flows, template, 1)
    assert rows[1].objective == pytest.approx(2.0, abs=1e-6)
    with pytest.raises(ValueError, match="b_max"):
        budget_sweep(net, flows, "worst-network", -1)


def test_sweep_parallel_matches_serial(example, sweep2):
    net, flows = example
    rows, _ = budget_sweep(net, flows, AttackKind.WORST_NETWORK, 1, workers=2)
    serial = sweep2[0]
    assert [r.objective for r in rows] == pytest.approx(
        [serial[0].objective, serial[1].objective], abs=1e-6
    )


def test_sweep_guards_against_regression(example, monkeypatch):
    net, flows = example

    def fake(net_, flows_, inst, **kw):
        return _fake_result(net_, flows_, 5.0 - 2.0 * inst.budget)

    monkeypatch.setattr(analysis, "solve_attack", fake)
    with pytest.raises(AssertionError, match="sweep objective decreased"):
        budget_sweep(net, flows, AttackKind.WORST_NETWORK, 1)


# ----------------------------------------------------------------------
# critical sensors


def test_critical_sensor_frequencies(example):
    net, flows = example
    results = [
        _fake_result(net, flows, 1.0, compromised=(3,)),
        _fake_result(net, flows, 2.0, compromised=(3, 6)),
        _fake_result(net, flows, 0.0, compromised=()),
    ]
    rows = critical_sensors(net, results)
    assert len(rows) == net.n_movements
    assert rows[0] == FrequencyRow(3, 3, 6, pytest.approx(2 / 3))
    assert rows[1] == FrequencyRow(6, 7, 4, pytest.approx(1 / 3))
    # remaining sensors tie at zero and keep position order
    assert [r.sensor for r in rows[2:6]] == [0, 1, 2, 4]

    skipped = AttackResult(kind=AttackKind.WORST_NETWORK, status=MilpStatus.INFEASIBLE)
    rows = critical_sensors(net, [skipped, results[0]])
    assert rows[0].frequency == pytest.approx(1.0)
    with pytest.raises(ValueError, match="at least one solved"):
        critical_sensors(net, [skipped])


# ----------------------------------------------------------------------
# queue simulation


def test_simulation_arithmetic():
    net, flows = _fork()
    sched = schedule_from_fractions(net, np.array([0.2]))
    trace = simulate_queues(net, flows, sched, 10)
    assert trace.periods == 10
    assert np.all(trace.queues[0] == 0.0)
    assert trace.queues[-1][0] == pytest.approx(20.0)
    assert trace.queues[-1][1] == pytest.approx(10.0)
    assert queue_slopes(trace, 5, 10) == pytest.approx([2.0, 1.0])
    assert trace.link_intensity == {
        1: 0.0,
        2: pytest.approx(1.0),
        3: pytest.approx(0.5),
    }


def test_stable_schedule_keeps_queues_flat(example):
    net, flows = example
    sched = solve_fixed_time(net, flows)
    trace = simulate_queues(net, flows, sched, 25)
    assert np.all(trace.queues <= 1e-9)
    assert all(v == 0.0 for v in trace.link_intensity.values())


def test_attacked_queue_golden(example):
    net, flows = example
    res = solve_attack(net, flows, AttackInstance(AttackKind.WORST_NETWORK, 1))
    trace = simulate_queues(net, flows, res.realized_schedule, 100)
    assert trace.queues[-1][net.movement_pos(3, 6)] == pytest.approx(200.0, abs=1e-6)


def test_simulation_guards():
    net, flows = _fork()
    sched = schedule_from_fractions(net, np.array([0.2]))
    with pytest.raises(ValueError, match="periods"):
        simulate_queues(net, flows, sched, 0)
    trace = simulate_queues(net, flows, sched, 5)
    for start, stop in ((-1, 3), (3, 3), (2, 9)):
        with pytest.raises(ValueError, match="start < stop"):
            queue_slopes(trace, start, stop)


# ----------------------------------------------------------------------
# report assembly and CSV output


def test_vulnerability_report_fields(example, sweep2):
    net, flows = example
    rows, results = sweep2
    report = vulnerability_report(net, flows, results, budgets=[0, 1, 2])
    assert report.nv == pytest.approx(6 / 58, abs=1e-6)
    assert set(report.lv) == {1, 3, 5, 7, 8, 10, 12, 14}
    assert all(0.0 <= r.frequency <= 1.0 for r in report.frequency)
    assert len(report.sweep) == 3
    assert [r.budget for r in report.sweep] == [0, 1, 2]
    assert report.accumulation.sum() == pytest.approx(6.0, abs=1e-6)

    with pytest.raises(ValueError, match="equal length"):
        vulnerability_report(net, flows, results, budgets=[1])
    with pytest.raises(ValueError, match="at least one result"):
        vulnerability_report(net, flows, [])


def test_emit_report_deterministic(example, sweep2, tmp_path):
    net, flows = example
    rows, results = sweep2
    report = vulnerability_report(net, flows, results, budgets=[0, 1, 2])
    trace = simulate_queues(net, flows, results[-1].realized_schedule, 50)
    first = emit_report(report, trace, tmp_path / "a", net=net, flows=flows)
    second = emit_report(report, trace, tmp_path / "b", net=net, flows=flows)
    names = [str(p).rsplit("/", 1)[1] for p in first]
    assert names == ["sweep.csv", "critical.csv", "accumulation.csv", "heatmap.csv"]
    for pa, pb in zip(first, second):
        assert open(pa, "rb").read() == open(pb, "rb").read()
    heat = open(first[-1]).read().splitlines()
    assert heat[0] == "link,intensity"
    values = [float(line.split(",")[1]) for line in heat[1:]]
    assert all(0.0 <= v <= 1.0 for v in values)


def test_emit_report_goldens(tmp_path):
    net, flows = _fork()
    sched = schedule_from_fractions(net, np.array([0.2]))
    service = np.array([2.0, 0.0])
    report = VulnerabilityReport(
        nv=0.75,
        lv={1: 0.6},
        frequency=(FrequencyRow(3, 3, 6, 2 / 3),),
        accumulation=np.maximum(0.0, flows.values - service),
        service=service,
        sweep=(
            SweepRow(0, 0.0, 0.0, (), MilpStatus.OPTIMAL),
            SweepRow(1, 2.0, 2 / 58, (3,), MilpStatus.OPTIMAL),
        ),
    )
    trace = simulate_queues(net, flows, sched, 10)
    paths = emit_report(report, trace, tmp_path, net=net, flows=flows)
    text = {str(p).rsplit("/", 1)[1]: open(p).read() for p in paths}
    assert text["sweep.csv"] == "budget,objective,nv\n0,0,0\n1,2,0.0344827586207\n"
    assert text["critical.csv"] == "sensor,from,to,frequency\n3,3,6,0.666666666667\n"
    assert text["accumulation.csv"] == (
        "from,to,flow,service,accumulation\n1,2,4,2,2\n1,3,1,0,1\n"
    )
    assert text["heatmap.csv"] == "link,intensity\n1,0\n2,1\n3,0.5\n"


def test_emit_report_partial_and_errors(tmp_path):
    report = VulnerabilityReport(
        nv=0.0, lv={}, frequency=(), accumulation=np.zeros(1),
        service=np.zeros(1), sweep=(),
    )
    paths = emit_report(report, None, tmp_path)
    names = [str(p).rsplit("/", 1)[1] for p in paths]
    assert names == ["sweep.csv", "critical.csv"]
    assert open(paths[1]).read() == "sensor,from,to,frequency\n"
    with pytest.raises(ValueError, match="unsupported report format"):
        emit_report(report, None, tmp_path, fmt="json")
