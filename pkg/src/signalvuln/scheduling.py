"""Fixed-time signal schedules from per-intersection linear programs.

For each intersection the schedule assigns every stage a fraction of the
cycle.  The fractions minimize total green time subject to covering demand:
sum over stages of (fraction * saturation) must reach each movement's flow.
The problem decomposes across intersections because stages never span two of
them.  A schedule is implementable when every per-intersection fraction sum
stays strictly below one; the leftover fraction absorbs lost time, giving the
cycle length T = L / (1 - max sum) * sample_rate.
"""

from dataclasses import dataclass

import numpy as np

from .simplex import GE, LpModel, LpStatus, solve_lp


class InfeasibleScheduleError(RuntimeError):
    """A positive-demand movement is not covered by any stage."""


@dataclass(frozen=True)
class Schedule:
    """Stage fractions aligned with ``net.stages`` plus per-intersection sums."""

    stage_fractions: np.ndarray
    intersection_ids: tuple
    intersection_loads: np.ndarray

    def __post_init__(self):
        for name in ("stage_fractions", "intersection_loads"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def load_of(self, intersection_id):
        return float(
            self.intersection_loads[self.intersection_ids.index(intersection_id)]
        )


@dataclass(frozen=True)
class FeasibilityReport:
    feasible: bool
    by_intersection: dict
    warnings: tuple


def _intersection_lp(net, flows, intersection_id):
    """LP for one intersection.  Returns (model, stage positions, movement positions)."""
    stage_pos = net.stages_of[intersection_id]
    move_pos = net.intersection_movements[intersection_id]
    n = len(stage_pos)
    local = {s: k for k, s in enumerate(stage_pos)}
    rows = []
    rhs = []
    kept_moves = []
    for mpos in move_pos:
        coeff = np.zeros(n)
        c = net.movements[mpos].saturation
        for s in net.movement_stages[mpos]:
            coeff[local[s]] += c
        rows.append(coeff)
        rhs.append(float(flows.values[mpos]))
        kept_moves.append(mpos)
    A = np.array(rows) if rows else np.zeros((0, n))
    model = LpModel(
        c=np.ones(n),
        A=A,
        rel=np.full(len(rows), GE, dtype=np.int8),
        b=np.array(rhs),
        lower=np.zeros(n),
        upper=np.full(n, np.inf),
        sense="min",
    )
    return model, stage_pos, tuple(kept_moves)


def _check_coverage(net, flows):
    for mpos, stages in enumerate(net.movement_stages):
        if not stages and flows.values[mpos] > 0:
            m = net.movements[mpos]
            raise InfeasibleScheduleError(
                f"movement ({m.from_link},{m.to_link}) has demand but no stage"
            )


def solve_fixed_time(net, flows, *, feas_tol=1e-9, opt_tol=1e-9, with_duals=False):
    """Minimum-green stage fractions for every intersection.

    Returns a Schedule; with ``with_duals=True`` returns (Schedule, duals)
    where duals is a per-movement array of covering-row multipliers (zero for
    movements in no stage).
    """
    _check_coverage(net, flows)
    fractions = np.zeros(len(net.stages))
    loads = np.zeros(len(net.intersections))
    duals = np.zeros(net.n_movements)
    ids = []
    for k, inter in enumerate(net.intersections):
        model, stage_pos, kept = _intersection_lp(net, flows, inter.id)
        sol = solve_lp(model, feas_tol=feas_tol, opt_tol=opt_tol)
        if sol.status != LpStatus.OPTIMAL:
            raise RuntimeError(
                f"intersection {inter.id} LP ended {sol.status.value}"
            )
        for local, spos in enumerate(stage_pos):
            fractions[spos] = sol.x[local]
        for local, mpos in enumerate(kept):
            duals[mpos] = sol.duals[local]
        loads[k] = float(sol.objective)
        ids.append(inter.id)
    sched = Schedule(
        stage_fractions=fractions,
        intersection_ids=tuple(ids),
        intersection_loads=loads,
    )
    if with_duals:
        return sched, duals
    return sched


def schedule_from_fractions(net, fractions):
    """Wrap raw stage fractions (aligned with ``net.stages``) as a Schedule."""
    fractions = np.asarray(fractions, dtype=float)
    if fractions.shape != (len(net.stages),):
        raise ValueError("fractions length must match stage count")
    ids = []
    loads = np.zeros(len(net.intersections))
    for k, inter in enumerate(net.intersections):
        ids.append(inter.id)
        loads[k] = float(sum(fractions[s] for s in net.stages_of[inter.id]))
    return Schedule(
        stage_fractions=fractions,
        intersection_ids=tuple(ids),
        intersection_loads=loads,
    )


def is_feasible(schedule, *, eps_strict=1e-9):
    """Strict feasibility (load < 1) per intersection and overall.

    Loads inside [1 - eps_strict, 1) count as feasible but are flagged in
    ``warnings`` so callers can surface the razor-thin margin.
    """
    by = {}
    warn = []
    for nid, load in zip(schedule.intersection_ids, schedule.intersection_loads):
        ok = load < 1.0
        by[nid] = bool(ok)
        if ok and load >= 1.0 - eps_strict:
            warn.append(nid)
    return FeasibilityReport(
        feasible=all(by.values()), by_intersection=by, warnings=tuple(warn)
    )


def cycle_length(schedule, lost_time, sample_rate):
    """T = lost_time / (1 - max load) * sample_rate, in seconds."""
    if not (sample_rate > 0):
        raise ValueError("sample_rate must be positive")
    if lost_time < 0:
        raise ValueError("lost_time must be nonnegative")
    max_load = float(np.max(schedule.intersection_loads)) if len(
        schedule.intersection_loads
    ) else 0.0
    if max_load >= 1.0:
        raise ValueError(f"schedule infeasible (sum lambda = {max_load:g})")
    return lost_time / (1.0 - max_load) * sample_rate


def cycle_lengths_by_intersection(schedule, lost_time, sample_rate):
    out = {}
    for nid, load in zip(schedule.intersection_ids, schedule.intersection_loads):
        if load >= 1.0:
            out[nid] = np.inf
        else:
            out[nid] = lost_time / (1.0 - float(load)) * sample_rate
    return out


def service_rates(net, schedule):
    """Vehicles per period each movement is served under the schedule."""
    out = np.zeros(net.n_movements)
    for mpos, stages in enumerate(net.movement_stages):
        c = net.movements[mpos].saturation
        out[mpos] = c * float(
            sum(schedule.stage_fractions[s] for s in stages)
        )
    return out


def accumulation_rates(net, flows, schedule):
    """Unserved demand per period: max(0, flow - service), per movement."""
    return np.maximum(0.0, flows.values - service_rates(net, schedule))


def unstable_movements(net, flows, schedule, tol=1e-9):
    """Movements whose demand strictly exceeds service (queues grow)."""
    rates = service_rates(net, schedule)
    out = []
    for mpos, m in enumerate(net.movements):
        if flows.values[mpos] - rates[mpos] > tol:
            out.append((m.from_link, m.to_link))
    return out


def served_flow(net, flows, schedule):
    """Demand actually served per period, summed over movements."""
    rates = service_rates(net, schedule)
    return float(np.sum(np.minimum(flows.values, rates)))


def schedule_csv(net, schedule):
    """CSV rows (intersection, stage, duration); stage is its global position."""
    lines = ["intersection,stage,duration"]
    for spos, st in enumerate(net.stages):
        lines.append(
            f"{st.intersection},{spos},{schedule.stage_fractions[spos]:.12g}"
        )
    return "\n".join(lines) + "\n"
