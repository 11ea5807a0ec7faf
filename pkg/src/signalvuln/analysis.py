"""Vulnerability metrics, budget sweeps, and a fluid queue simulator.

The metrics here summarize a solved attack: how much demand the falsified
schedule leaves unserved (network vulnerability), how that shortfall
concentrates on a single lane (lane vulnerability), and which sensors keep
reappearing in optimal attacks as the budget grows (critical sensors).  A
discrete-time fluid simulator replays any schedule against the true flows
so queue growth can be checked against the predicted accumulation rates,
and report emission writes the whole bundle as deterministic CSV files.
"""

from __future__ import annotations

import dataclasses
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .attacks import AttackInstance, AttackKind, solve_attack
from .milp import MilpStatus
from .scheduling import service_rates


@dataclass(frozen=True)
class SweepRow:
    """One budget of a sweep: objective and network vulnerability."""

    budget: int
    objective: float | None
    nv: float | None
    compromised: tuple[int, ...]
    status: MilpStatus


@dataclass(frozen=True)
class FrequencyRow:
    sensor: int
    from_link: int
    to_link: int
    frequency: float


@dataclass(frozen=True)
class VulnerabilityReport:
    """Metrics bundle for one or more solved attacks on a network.

    nv and the per-movement accumulation describe the focal result, lv maps
    each lane with outgoing flow to its lane vulnerability, frequency lists
    every sensor with its attack frequency over the supplied results, and
    sweep keeps one row per solved budget.
    """

    nv: float
    lv: dict[int, float]
    frequency: tuple[FrequencyRow, ...]
    accumulation: np.ndarray
    service: np.ndarray
    sweep: tuple[SweepRow, ...]


@dataclass(frozen=True)
class SimTrace:
    """Queue trajectories of one simulation run.

    queues has shape (periods + 1, n_movements) with queues[0] == 0; the
    intensity of a link aggregates the final queues of the movements that
    feed into it, normalized by the largest such aggregate in the network.
    """

    queues: np.ndarray
    link_intensity: dict[int, float]

    @property
    def periods(self):
        return self.queues.shape[0] - 1


def _realized_accumulation(result):
    if result.accumulation is None:
        raise ValueError("attack result carries no realized accumulation")
    return np.asarray(result.accumulation, dtype=float)


def network_vulnerability(net, flows, result):
    """Fraction of total flow the attacked schedule leaves unserved."""
    total = float(np.sum(flows.values))
    if total <= 0.0:
        raise ValueError("network vulnerability undefined for zero total flow")
    return float(np.sum(_realized_accumulation(result)) / total)


def lane_vulnerability(net, flows, result, lane):
    """Fraction of the lane's outgoing flow left unserved by the attack."""
    acc = _realized_accumulation(result)
    positions = [
        pos for pos, m in enumerate(net.movements) if m.from_link == lane
    ]
    if lane not in net.link_index:
        raise ValueError(f"unknown lane {lane}")
    lane_flow = float(sum(flows.values[p] for p in positions))
    if lane_flow <= 0.0:
        raise ValueError(f"lane {lane} has zero outgoing flow")
    return float(sum(acc[p] for p in positions) / lane_flow)


def _sweep_instance(kind, budget, target_lane, targets):
    if isinstance(kind, AttackInstance):
        return dataclasses.replace(kind, budget=budget)
    kind = AttackKind(kind)
    return AttackInstance(
        kind=kind, budget=budget, target_lane=target_lane, targets=tuple(targets)
    )


def budget_sweep(
    net,
    flows,
    kind,
    b_max,
    *,
    target_lane=None,
    targets=(),
    workers=1,
    node_limit=None,
    time_limit=None,
    gap_tol=1e-6,
):
    """Solve the attack for every budget B = 0..b_max.

    kind may be an AttackKind, its string value, or a template
    AttackInstance whose budget is replaced per row.  Budgets solve
    independently, so rows are identical whichever worker count is used.
    Returns (rows, results) with one entry per budget in order.
    """
    if b_max < 0:
        raise ValueError("b_max must be >= 0")
    budgets = list(range(b_max + 1))
    instances = [_sweep_instance(kind, b, target_lane, targets) for b in budgets]

    def run(inst):
        return solve_attack(
            net,
            flows,
            inst,
            node_limit=node_limit,
            time_limit=time_limit,
            gap_tol=gap_tol,
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, instances))
    else:
        results = [run(inst) for inst in instances]

    total = float(np.sum(flows.values))
    rows = []
    for inst, res in zip(instances, results):
        if res.flows is None:
            rows.append(SweepRow(inst.budget, None, None, (), res.status))
            continue
        nv = network_vulnerability(net, flows, res) if total > 0 else None
        rows.append(
            SweepRow(inst.budget, res.objective, nv, res.compromised, res.status)
        )
    first_kind = instances[0].kind
    if first_kind is AttackKind.WORST_NETWORK:
        objs = [r.objective for r in rows if r.objective is not None]
        for a, b in zip(objs, objs[1:]):
            # larger budgets only add attack options
            assert b >= a - 1e-6, f"sweep objective decreased: {a} -> {b}"
    return tuple(rows), tuple(results)


def critical_sensors(net, results):
    """Attack frequency of every sensor over a collection of solved attacks.

    The frequency of a sensor is the share of results whose compromised set
    contains it.  Rows come back sorted by descending frequency, position
    breaking ties.
    """
    results = [r for r in results if r.flows is not None]
    if not results:
        raise ValueError("critical_sensors needs at least one solved attack")
    counts = np.zeros(net.n_movements)
    for res in results:
        for pos in res.compromised:
            counts[pos] += 1.0
    freq = counts / float(len(results))
    order = sorted(range(net.n_movements), key=lambda p: (-freq[p], p))
    return tuple(
        FrequencyRow(
            sensor=p,
            from_link=net.movements[p].from_link,
            to_link=net.movements[p].to_link,
            frequency=float(freq[p]),
        )
        for p in order
    )


def simulate_queues(net, flows, sched, periods):
    """Replay a schedule against the true flows for the given periods.

    Per movement and period the queue evolves as
    q(t+1) = max(0, q(t) + f - s) with q(0) = 0, where s is the service
    rate the schedule grants.  Real-valued queues; no integrality.
    """
    if periods < 1:
        raise ValueError("periods must be >= 1")
    service = service_rates(net, sched)
    fvals = flows.values
    queues = np.zeros((periods + 1, net.n_movements))
    for t in range(periods):
        queues[t + 1] = np.maximum(0.0, queues[t] + fvals - service)
    final = queues[-1]
    per_link = {
        link.id: float(sum(final[p] for p in net.inflow_movements.get(link.id, ())))
        for link in net.links
    }
    peak = max(per_link.values(), default=0.0)
    if peak > 0.0:
        intensity = {l: v / peak for l, v in per_link.items()}
    else:
        intensity = {l: 0.0 for l in per_link}
    return SimTrace(queues=queues, link_intensity=intensity)


def queue_slopes(trace, start, stop):
    """Average per-period queue growth between two periods of a trace."""
    if not 0 <= start < stop <= trace.periods:
        raise ValueError("need 0 <= start < stop <= periods")
    return (trace.queues[stop] - trace.queues[start]) / float(stop - start)


def vulnerability_report(net, flows, results, *, budgets=None, focal=-1):
    """Bundle metrics for a list of solved attacks into one report.

    nv, lv, service, and accumulation describe results[focal]; the
    frequency table counts sensor membership over every result with a
    positive budget (falling back to all results when none has one).
    budgets optionally labels each result; by default the size of its
    compromised set is used.
    """
    results = list(results)
    if not results:
        raise ValueError("vulnerability_report needs at least one result")
    if budgets is None:
        budgets = [len(r.compromised) if r.flows is not None else 0 for r in results]
    budgets = list(budgets)
    if len(budgets) != len(results):
        raise ValueError("budgets and results must have equal length")
    focal_res = results[focal]
    acc = _realized_accumulation(focal_res)
    service = service_rates(net, focal_res.realized_schedule)
    nv = network_vulnerability(net, flows, focal_res)
    lv = {}
    for link in net.links:
        positions = net.outflow_movements.get(link.id, ())
        if sum(flows.values[p] for p in positions) > 0.0:
            lv[link.id] = lane_vulnerability(net, flows, focal_res, link.id)
    ensemble = [
        r for r, b in zip(results, budgets) if r.flows is not None and b > 0
    ]
    if not ensemble:
        ensemble = [r for r in results if r.flows is not None]
    freq = critical_sensors(net, ensemble)
    sweep = []
    for res, b in zip(results, budgets):
        if res.flows is None:
            sweep.append(SweepRow(b, None, None, (), res.status))
        else:
            sweep.append(
                SweepRow(
                    b,
                    res.objective,
                    network_vulnerability(net, flows, res),
                    res.compromised,
                    res.status,
                )
            )
    return VulnerabilityReport(
        nv=nv,
        lv=lv,
        frequency=freq,
        accumulation=acc,
        service=service,
        sweep=tuple(sweep),
    )


def _fmt(value):
    if value is None:
        return ""
    return format(float(value), ".12g")


def _write_csv(path, header, rows):
    lines = [header]
    lines.extend(",".join(str(c) for c in row) for row in rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def emit_report(report, trace, out_dir, *, net=None, flows=None, fmt="csv"):
    """Write the report (and optional trace) as CSV files under out_dir.

    Produces sweep.csv, critical.csv, accumulation.csv (when net and flows
    are given), and heatmap.csv (when a trace is given).  Output is
    byte-identical across runs for identical inputs.
    """
    if fmt != "csv":
        raise ValueError(f"unsupported report format {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    written.append(
        _write_csv(
            os.path.join(out_dir, "sweep.csv"),
            "budget,objective,nv",
            [(r.budget, _fmt(r.objective), _fmt(r.nv)) for r in report.sweep],
        )
    )
    written.append(
        _write_csv(
            os.path.join(out_dir, "critical.csv"),
            "sensor,from,to,frequency",
            [
                (r.sensor, r.from_link, r.to_link, _fmt(r.frequency))
                for r in report.frequency
            ],
        )
    )
    if net is not None and flows is not None:
        written.append(
            _write_csv(
                os.path.join(out_dir, "accumulation.csv"),
                "from,to,flow,service,accumulation",
                [
                    (
                        m.from_link,
                        m.to_link,
                        _fmt(flows.values[p]),
                        _fmt(report.service[p]),
                        _fmt(report.accumulation[p]),
                    )
                    for p, m in enumerate(net.movements)
                ],
            )
        )
    if trace is not None:
        written.append(
            _write_csv(
                os.path.join(out_dir, "heatmap.csv"),
                "link,intensity",
                [
                    (link, _fmt(trace.link_intensity[link]))
                    for link in sorted(trace.link_intensity)
                ],
            )
        )
    return written
