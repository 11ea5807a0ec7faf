"""Sensor-falsification attacks against fixed-time signal schedules.

An attacker compromises up to B flow sensors and reports falsified readings
F̃; the controller, unaware, re-optimizes its per-intersection schedule for
F̃ while true demand stays F.  Three attacker objectives are supported:

* worst-network: maximize total accumulation Σ max(0, f - s̃), the per-period
  excess of true demand over the service the falsified schedule grants;
* worst-lane: minimize the service granted to movements leaving one lane;
* risk-averse: meet per-movement service ceilings with the smallest possible
  falsification norm (inf-norm by default, 1-norm optional).

Each is a bilevel program.  It is reduced to a single level by replacing the
controller's inner LP with its KKT conditions, encoded through big-M
complementarity binaries whose constants come from structural bounds (stage
fractions below one, multipliers below 1/saturation), never from a global
magic number.  Falsified readings must stay nonnegative, conserve flow on
internal links, agree with true readings outside the compromised set, and
keep every intersection strictly schedulable.

``brute_force_oracle`` independently enumerates compromised subsets and grid
values (completing values forced by conservation) and evaluates the true
objective with a deterministic inner solve; it validates the MILP path and
is exact on networks where each movement belongs to a single stage.
"""

import enum
import json
from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from .milp import (
    MilpStatus,
    ModelBuilder,
    linearize_product,
    solution_violations,
    solve_milp,
)
from .network import FlowMatrix, check_conservation
from .scheduling import (
    schedule_from_fractions,
    service_rates,
    solve_fixed_time,
)


class AttackConstructionError(ValueError):
    """The attack model cannot be assembled for this network."""


class AttackSpecError(ValueError):
    """An attack specification file could not be parsed."""


class AttackKind(enum.Enum):
    WORST_NETWORK = "worst-network"
    WORST_LANE = "worst-lane"
    RISK_AVERSE = "risk-averse"


@dataclass(frozen=True)
class AttackTarget:
    """Service ceiling for one movement: demand s̃(from,to) <= alpha."""

    from_link: int
    to_link: int
    alpha: float


@dataclass(frozen=True)
class AttackInstance:
    """One attacker problem: objective kind, sensor budget, and knobs.

    ``epsilon`` is the strict-schedulability margin (stage fractions at each
    intersection must sum to at most 1 - epsilon).  ``flow_bound`` caps every
    falsified reading; when None it defaults per movement to
    2 * max(total entry flow, saturation, nominal flow).
    """

    kind: AttackKind
    budget: int
    target_lane: int = None
    targets: tuple = ()
    norm: str = "inf"
    epsilon: float = 1e-6
    flow_bound: float = None


def validate_attack(net, flows, instance):
    """Check an instance against a network.  Returns a list of error strings."""
    errors = []
    if not isinstance(instance.kind, AttackKind):
        errors.append("unknown attack kind")
        return errors
    if isinstance(instance.budget, bool) or not isinstance(instance.budget, int):
        errors.append("budget must be an integer")
    elif instance.budget < 0:
        errors.append("budget must be nonnegative")
    elif instance.budget > net.n_movements:
        errors.append(
            f"budget {instance.budget} exceeds sensor count {net.n_movements}"
        )
    if not (0.0 < instance.epsilon < 1.0):
        errors.append("epsilon must lie in (0, 1)")
    if instance.norm not in ("inf", "l1"):
        errors.append(f"unknown norm {instance.norm!r} (use 'inf' or 'l1')")
    if instance.flow_bound is not None:
        if not (instance.flow_bound > 0):
            errors.append("flow_bound must be positive")
        elif flows is not None and instance.flow_bound < float(np.max(flows.values, initial=0.0)):
            errors.append("flow_bound is below the largest nominal flow")

    if instance.kind is AttackKind.WORST_LANE:
        if instance.target_lane is None:
            errors.append("worst-lane attack needs a target lane")
        elif instance.target_lane not in net.link_index:
            errors.append(f"target lane {instance.target_lane} is not a link")
        elif not net.outflow_movements[instance.target_lane]:
            errors.append(
                f"target lane {instance.target_lane} has no outgoing movements"
            )
    if instance.kind is AttackKind.RISK_AVERSE:
        if not instance.targets:
            errors.append("risk-averse attack needs at least one target movement")
        for t in instance.targets:
            if (t.from_link, t.to_link) not in net.movement_index:
                errors.append(
                    f"target ({t.from_link},{t.to_link}) is not a movement"
                )

    if flows is not None:
        for mpos, stages in enumerate(net.movement_stages):
            if not stages and flows.values[mpos] > 0:
                m = net.movements[mpos]
                errors.append(
                    f"movement ({m.from_link},{m.to_link}) has demand but no stage"
                )
    return errors


# ----------------------------------------------------------------------
# model assembly


def _fn(m):
    return f"f[{m.from_link},{m.to_link}]"


def _zn(m):
    return f"z[{m.from_link},{m.to_link}]"


def _mun(m):
    return f"mu[{m.from_link},{m.to_link}]"


def _bn(m):
    return f"b[{m.from_link},{m.to_link}]"


def _yn(m):
    return f"y[{m.from_link},{m.to_link}]"


def _lamn(s):
    return f"lam[{s}]"


def _dn(s):
    return f"d[{s}]"


def _check_coverage(net, flows):
    for mpos, stages in enumerate(net.movement_stages):
        if not stages and flows.values[mpos] > 0:
            m = net.movements[mpos]
            raise AttackConstructionError(
                f"movement ({m.from_link},{m.to_link}) has demand but no stage"
            )


def flow_caps(net, flows, instance):
    """Per-movement upper bounds on falsified readings.

    Returns (model_cap, var_ub): the attack model's plausibility ceiling and
    the tighter implied variable bound.  A staged movement can never be
    served more than saturation * (sum of its stage fractions) < saturation,
    so readings above saturation are unschedulable and the variable bound
    shrinks to it without cutting any feasible point.
    """
    entry = set(net.entry_links)
    fvals = flows.values
    entry_total = float(
        sum(fvals[p] for p, m in enumerate(net.movements) if m.from_link in entry)
    )
    caps = np.empty(net.n_movements)
    ubs = np.empty(net.n_movements)
    for pos, m in enumerate(net.movements):
        f = float(fvals[pos])
        if instance.flow_bound is not None:
            cap = float(instance.flow_bound)
        else:
            cap = 2.0 * max(entry_total, m.saturation, f)
        caps[pos] = cap
        if net.movement_stages[pos]:
            ubs[pos] = max(min(cap, m.saturation), f)
        else:
            ubs[pos] = f  # uncovered movements keep their (zero) reading
    return caps, ubs


def _kkt_intersection(bld, net, nid, epsilon):
    """KKT system of one intersection's scheduling LP, over existing f vars.

    Emits primal feasibility, dual feasibility, and complementary slackness
    with binaries b (movement row tight) and d (stage in use).  Big-M values
    are structural: slack <= saturation because stage fractions sum below
    one, multipliers <= 1/saturation from the stage dual rows.  Any (lam, mu)
    satisfying the system is optimal for the inner LP at the current f.
    """
    stage_pos = net.stages_of[nid]
    move_pos = net.intersection_movements[nid]
    for s in stage_pos:
        bld.add_var(_lamn(s), 0.0, 1.0)
        bld.add_var(_dn(s), binary=True)
    for mpos in move_pos:
        m = net.movements[mpos]
        bld.add_var(_mun(m), 0.0, 1.0 / m.saturation)
        bld.add_var(_bn(m), binary=True)
    for mpos in move_pos:
        m = net.movements[mpos]
        c = m.saturation
        terms = {_lamn(s): c for s in net.movement_stages[mpos]}
        bld.add_ge({**terms, _fn(m): -1.0}, 0.0)
        # tight row forced when b = 1 (served exactly the reported demand)
        bld.add_le({**terms, _fn(m): -1.0, _bn(m): c}, c)
        bld.add_le({_mun(m): 1.0, _bn(m): -1.0 / c}, 0.0)
    for s in stage_pos:
        dterms = {_mun(net.movements[mpos]): net.movements[mpos].saturation
                  for mpos in net.stage_movements[s]}
        bld.add_le(dict(dterms), 1.0)
        # a used stage (d = 1) must have zero reduced cost
        bld.add_ge({**dterms, _dn(s): -1.0}, 0.0)
        bld.add_le({_lamn(s): 1.0, _dn(s): -1.0}, 0.0)
    bld.add_le({_lamn(s): 1.0 for s in stage_pos}, 1.0 - epsilon)


def build_kkt_inner(bld, net, *, epsilon=1e-6):
    """Add the full inner-optimality system (all intersections) to ``bld``.

    Requires the falsified-reading variables ``f[i,j]`` to exist already.
    Also emits the strict-schedulability row per intersection.
    """
    for inter in net.intersections:
        _kkt_intersection(bld, net, inter.id, epsilon)


def _add_base(bld, net, flows, instance, ubs):
    fvals = flows.values
    for pos, m in enumerate(net.movements):
        bld.add_var(_fn(m), 0.0, float(ubs[pos]))
    for m in net.movements:
        bld.add_var(_zn(m), binary=True)
    for pos, m in enumerate(net.movements):
        f = float(fvals[pos])
        if ubs[pos] > f:
            bld.add_le({_fn(m): 1.0, _zn(m): -(float(ubs[pos]) - f)}, f)
        if f > 0:
            bld.add_ge({_fn(m): 1.0, _zn(m): f}, f)
    bld.add_le({_zn(m): 1.0 for m in net.movements}, float(instance.budget))
    for lid in net.internal_links:
        coeffs = {}
        for mpos in net.inflow_movements[lid]:
            name = _fn(net.movements[mpos])
            coeffs[name] = coeffs.get(name, 0.0) + 1.0
        for mpos in net.outflow_movements[lid]:
            name = _fn(net.movements[mpos])
            coeffs[name] = coeffs.get(name, 0.0) - 1.0
        bld.add_eq(coeffs, 0.0)
    build_kkt_inner(bld, net, epsilon=instance.epsilon)


def _add_worst_network(bld, net, flows):
    fvals = flows.values
    for mpos, m in enumerate(net.movements):
        f = float(fvals[mpos])
        stages = net.movement_stages[mpos]
        if not stages or f <= 0:
            continue
        c = m.saturation
        bld.add_var(_yn(m), binary=True, obj=f)
        lam_terms = {_lamn(s): c for s in stages}
        # y switches on whenever true demand outruns the granted service
        bld.add_ge({**lam_terms, _yn(m): f}, f)
        wnames = []
        for s in stages:
            wn = linearize_product(
                bld, _yn(m), _lamn(s), 1.0,
                product_name=f"w[{m.from_link},{m.to_link},{s}]",
            )
            bld.set_objective(wn, -c)
            wnames.append(wn)
        # counted accumulation is f - s̃ <= f - f̃ <= f z, zero otherwise;
        # tying it to the sensor binary tightens the relaxation a lot
        bld.add_le({_yn(m): f, _zn(m): -f, **{wn: -c for wn in wnames}}, 0.0)


def _add_worst_lane(bld, net, instance):
    out = net.outflow_movements.get(instance.target_lane, ())
    if not out:
        raise AttackConstructionError(
            f"target lane {instance.target_lane} has no outgoing movements"
        )
    coeffs = {}
    for mpos in out:
        m = net.movements[mpos]
        for s in net.movement_stages[mpos]:
            coeffs[_lamn(s)] = coeffs.get(_lamn(s), 0.0) + m.saturation
    for name, v in coeffs.items():
        bld.set_objective(name, v)


def _add_risk_averse(bld, net, flows, instance, ubs):
    fvals = flows.values
    devmax = np.maximum(ubs - fvals, fvals)
    if instance.norm == "inf":
        bld.add_var("dev", 0.0, float(np.max(devmax, initial=0.0)), obj=1.0)
        for pos, m in enumerate(net.movements):
            f = float(fvals[pos])
            bld.add_le({_fn(m): 1.0, "dev": -1.0}, f)
            bld.add_ge({_fn(m): 1.0, "dev": 1.0}, f)
    else:
        for pos, m in enumerate(net.movements):
            f = float(fvals[pos])
            dn = f"dev[{m.from_link},{m.to_link}]"
            bld.add_var(dn, 0.0, float(devmax[pos]), obj=1.0)
            bld.add_le({_fn(m): 1.0, dn: -1.0}, f)
            bld.add_ge({_fn(m): 1.0, dn: 1.0}, f)
    for t in instance.targets:
        mpos = net.movement_pos(t.from_link, t.to_link)
        m = net.movements[mpos]
        terms = {_lamn(s): m.saturation for s in net.movement_stages[mpos]}
        bld.add_le(terms, float(t.alpha))


def _branch_priority(names):
    # resolve sensors first, then accumulation switches, then KKT binaries
    tiers = np.full(len(names), 9, dtype=int)
    for i, n in enumerate(names):
        if n.startswith("z["):
            tiers[i] = 0
        elif n.startswith("y["):
            tiers[i] = 1
        elif n.startswith(("b[", "d[")):
            tiers[i] = 2
    return tiers


def _assemble(net, flows, instance):
    _check_coverage(net, flows)
    _, ubs = flow_caps(net, flows, instance)
    sense = "max" if instance.kind is AttackKind.WORST_NETWORK else "min"
    bld = ModelBuilder(sense)
    _add_base(bld, net, flows, instance, ubs)
    if instance.kind is AttackKind.WORST_NETWORK:
        _add_worst_network(bld, net, flows)
    elif instance.kind is AttackKind.WORST_LANE:
        _add_worst_lane(bld, net, instance)
    else:
        _add_risk_averse(bld, net, flows, instance, ubs)
    model = bld.build()
    return bld, model, _branch_priority(bld.names), ubs


def build_worst_network(net, flows, instance):
    """Single-level MILP maximizing total accumulation.  Returns a MilpModel."""
    if instance.kind is not AttackKind.WORST_NETWORK:
        raise ValueError("instance kind must be worst-network")
    return _assemble(net, flows, instance)[1]


def build_worst_lane(net, flows, instance):
    """Single-level MILP minimizing service of one lane's movements."""
    if instance.kind is not AttackKind.WORST_LANE:
        raise ValueError("instance kind must be worst-lane")
    return _assemble(net, flows, instance)[1]


def build_risk_averse(net, flows, instance):
    """Single-level MILP minimizing the falsification norm under targets."""
    if instance.kind is not AttackKind.RISK_AVERSE:
        raise ValueError("instance kind must be risk-averse")
    return _assemble(net, flows, instance)[1]


# ----------------------------------------------------------------------
# deterministic inner response (shared by extraction, warm starts, oracle)


def _single_stage(net):
    return all(len(s) <= 1 for s in net.movement_stages)


def _response(net, fvalues):
    """(stage fractions, per-intersection loads, per-movement service).

    For networks where every movement sits in exactly one stage the optimal
    fraction of a stage is simply its largest demand ratio, computed in
    closed form; otherwise the scheduling LP is solved.
    """
    if _single_stage(net):
        fractions = np.zeros(len(net.stages))
        for s, members in enumerate(net.stage_movements):
            r = 0.0
            for mpos in members:
                r = max(r, fvalues[mpos] / net.movements[mpos].saturation)
            fractions[s] = r
        loads = np.array(
            [
                float(sum(fractions[s] for s in net.stages_of[inter.id]))
                for inter in net.intersections
            ]
        )
    else:
        sched = solve_fixed_time(net, FlowMatrix(fvalues))
        fractions = np.asarray(sched.stage_fractions)
        loads = np.asarray(sched.intersection_loads)
    service = np.zeros(net.n_movements)
    for mpos, m in enumerate(net.movements):
        service[mpos] = m.saturation * float(
            sum(fractions[s] for s in net.movement_stages[mpos])
        )
    return fractions, loads, service


def _objective_of(kind, net, flows, instance, fvalues, service):
    if kind is AttackKind.WORST_NETWORK:
        return float(np.sum(np.maximum(0.0, flows.values - service)))
    if kind is AttackKind.WORST_LANE:
        out = net.outflow_movements[instance.target_lane]
        return float(sum(service[p] for p in out))
    dev = np.abs(fvalues - flows.values)
    if instance.norm == "inf":
        return float(np.max(dev, initial=0.0))
    return float(np.sum(dev))


def _targets_met(net, instance, service, tol=1e-9):
    for t in instance.targets:
        mpos = net.movement_pos(t.from_link, t.to_link)
        if service[mpos] > t.alpha + tol:
            return False
    return True


# ----------------------------------------------------------------------
# results


@dataclass
class AttackResult:
    """Outcome of one attack solve.

    ``schedule`` is the controller response chosen inside the MILP (the
    attacker-preferred optimum); ``realized_schedule`` re-solves the inner LP
    deterministically on the same falsified readings.  They can differ only
    when the inner LP has several optima.  ``accumulation`` and
    ``realized_objective`` use the realized schedule; ``objective`` is the
    MILP value.  ``compromised`` lists sensors whose reading actually moved
    (above 1e-7), ``selected`` the sensors the solver marked, a superset.
    """

    kind: AttackKind
    status: MilpStatus
    objective: float = None
    bound: float = None
    flows: FlowMatrix = None
    compromised: tuple = ()
    selected: tuple = ()
    schedule: object = None
    realized_schedule: object = None
    accumulation: np.ndarray = None
    milp_accumulation: np.ndarray = None
    realized_objective: float = None
    nodes: int = 0
    iterations: int = 0


_CHANGE_TOL = 1e-7


def _extract(net, flows, instance, bld, sol):
    x = sol.x
    fvalues = np.array(
        [max(0.0, x[bld.index(_fn(m))]) for m in net.movements]
    )
    selected = tuple(
        pos for pos, m in enumerate(net.movements) if x[bld.index(_zn(m))] > 0.5
    )
    changed = tuple(
        int(p) for p in np.flatnonzero(np.abs(fvalues - flows.values) > _CHANGE_TOL)
    )
    fractions = np.array(
        [max(0.0, x[bld.index(_lamn(s))]) for s in range(len(net.stages))]
    )
    milp_sched = schedule_from_fractions(net, fractions)
    milp_service = service_rates(net, milp_sched)
    milp_acc = np.maximum(0.0, flows.values - milp_service)
    realized = solve_fixed_time(net, FlowMatrix(fvalues))
    real_service = service_rates(net, realized)
    real_acc = np.maximum(0.0, flows.values - real_service)
    realized_obj = _objective_of(
        instance.kind, net, flows, instance, fvalues, real_service
    )
    return AttackResult(
        kind=instance.kind,
        status=sol.status,
        objective=float(sol.objective),
        bound=float(sol.bound),
        flows=FlowMatrix(fvalues),
        compromised=changed,
        selected=selected,
        schedule=milp_sched,
        realized_schedule=realized,
        accumulation=real_acc,
        milp_accumulation=milp_acc,
        realized_objective=realized_obj,
        nodes=sol.nodes,
        iterations=sol.iterations,
    )


# ----------------------------------------------------------------------
# warm starts


def _conserving(net, cand):
    return not check_conservation(net, cand, tol=1e-9)


def _warm_candidates(net, flows, instance):
    """Falsified-reading profiles that are cheap to test as incumbents."""
    fvals = flows.values
    yield flows
    if instance.budget >= 1:
        if instance.kind is AttackKind.RISK_AVERSE:
            values = {}
            for t in instance.targets:
                mpos = net.movement_pos(t.from_link, t.to_link)
                f = float(fvals[mpos])
                for v in (0.0, f / 2.0, min(f, max(t.alpha, 0.0))):
                    values.setdefault(mpos, set()).add(v)
            for mpos, vals in sorted(values.items()):
                for v in sorted(vals):
                    cand = flows.replace(mpos, v)
                    if _conserving(net, cand):
                        yield cand
            if len(values) > 1 and instance.budget >= len(values):
                out = fvals.copy()
                for t in instance.targets:
                    mpos = net.movement_pos(t.from_link, t.to_link)
                    out[mpos] = min(float(fvals[mpos]), max(t.alpha, 0.0))
                cand = FlowMatrix(out)
                if _conserving(net, cand):
                    yield cand
        else:
            singles = []
            for mpos in range(net.n_movements):
                if fvals[mpos] <= 0 or not net.movement_stages[mpos]:
                    continue
                cand = flows.replace(mpos, 0.0)
                if _conserving(net, cand):
                    singles.append(mpos)
                    yield cand
            if instance.budget >= 2 and len(singles) >= 2:
                out = fvals.copy()
                for mpos in singles[: instance.budget]:
                    out[mpos] = 0.0
                yield FlowMatrix(out)
            if instance.budget >= 2:
                yield from _pair_candidates(net, flows, instance)
    nonzero = int(np.count_nonzero(fvals))
    if instance.budget >= nonzero and nonzero > 0:
        yield FlowMatrix(np.zeros_like(fvals))


def _pair_candidates(net, flows, instance):
    """Coherent two-sensor drops across an internal link.

    Zeroing one inflow of an internal link and lowering one outflow by the
    same amount keeps conservation intact while starving two movements at
    once.  For larger budgets the best disjoint pairs are also combined.
    """
    fvals = flows.values
    pairs = []
    for lid in net.internal_links:
        for m1 in net.inflow_movements[lid]:
            f1 = float(fvals[m1])
            if f1 <= 0:
                continue
            for m2 in net.outflow_movements[lid]:
                f2 = float(fvals[m2])
                if m2 == m1 or f1 > f2:
                    continue
                out = fvals.copy()
                out[m1] = 0.0
                out[m2] = f2 - f1
                cand = FlowMatrix(out)
                if not _conserving(net, cand):
                    continue
                _, loads, service = _response(net, cand.values)
                if np.any(loads > 1.0 - instance.epsilon + 1e-12):
                    continue
                gain = float(np.sum(np.maximum(0.0, fvals - service)))
                pairs.append((gain, m1, m2, cand))
                yield cand
    if instance.budget < 4 or len(pairs) < 2:
        return
    pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
    used = set()
    out = fvals.copy()
    taken = 0
    for gain, m1, m2, _ in pairs:
        if gain <= 0 or taken + 2 > instance.budget:
            break
        links = {
            net.movements[m1].from_link, net.movements[m1].to_link,
            net.movements[m2].from_link, net.movements[m2].to_link,
        }
        if used & links:
            continue
        out[m1] = 0.0
        out[m2] = out[m2] - float(fvals[m1])
        used |= links
        taken += 2
    if taken >= 4:
        cand = FlowMatrix(out)
        if _conserving(net, cand):
            yield cand


def _best_candidate(net, flows, instance, extra=()):
    """Deterministically pick the best feasible warm-start profile."""
    best = None
    best_val = None
    maximize = instance.kind is AttackKind.WORST_NETWORK
    candidates = list(extra) + list(_warm_candidates(net, flows, instance))
    for cand in candidates:
        changed = int(np.count_nonzero(np.abs(cand.values - flows.values) > 0))
        if changed > instance.budget:
            continue
        _, loads, service = _response(net, cand.values)
        if np.any(loads > 1.0 - instance.epsilon + 1e-12):
            continue
        if instance.kind is AttackKind.RISK_AVERSE and not _targets_met(
            net, instance, service
        ):
            continue
        val = _objective_of(instance.kind, net, flows, instance, cand.values, service)
        if best_val is None or (val > best_val if maximize else val < best_val):
            best, best_val = cand, val
    return best


def _warm_vector(net, flows, instance, bld, model, cand):
    x = np.zeros(model.lp.n_vars)
    sched, duals = solve_fixed_time(net, cand, with_duals=True)
    service = service_rates(net, sched)
    for pos, m in enumerate(net.movements):
        x[bld.index(_fn(m))] = cand.values[pos]
        if cand.values[pos] != flows.values[pos]:
            x[bld.index(_zn(m))] = 1.0
    for s in range(len(net.stages)):
        lam = float(sched.stage_fractions[s])
        x[bld.index(_lamn(s))] = lam
        x[bld.index(_dn(s))] = 1.0 if lam > _CHANGE_TOL else 0.0
    for pos, m in enumerate(net.movements):
        if not net.movement_stages[pos]:
            continue
        mu = min(max(float(duals[pos]), 0.0), 1.0 / m.saturation)
        x[bld.index(_mun(m))] = mu
        x[bld.index(_bn(m))] = 1.0 if mu > _CHANGE_TOL else 0.0
    if instance.kind is AttackKind.WORST_NETWORK:
        for pos, m in enumerate(net.movements):
            stages = net.movement_stages[pos]
            if not stages or flows.values[pos] <= 0:
                continue
            y = 1.0 if flows.values[pos] - service[pos] > 1e-9 else 0.0
            x[bld.index(_yn(m))] = y
            for s in stages:
                x[bld.index(f"w[{m.from_link},{m.to_link},{s}]")] = (
                    y * float(sched.stage_fractions[s])
                )
    elif instance.kind is AttackKind.RISK_AVERSE:
        dev = np.abs(cand.values - flows.values)
        if instance.norm == "inf":
            x[bld.index("dev")] = float(np.max(dev, initial=0.0))
        else:
            for pos, m in enumerate(net.movements):
                x[bld.index(f"dev[{m.from_link},{m.to_link}]")] = float(dev[pos])
    if solution_violations(model, x):
        return None
    return x


# ----------------------------------------------------------------------
# solving


def solve_attack(
    net,
    flows,
    instance,
    *,
    node_limit=None,
    time_limit=None,
    gap_tol=1e-6,
    node_log=None,
    warm_start=True,
    warm_profiles=(),
):
    """Build and exactly solve one attack.  Returns an AttackResult.

    The result carries both the schedule the MILP chose and a deterministic
    re-solve of the inner LP on the falsified readings.  Under a node or
    time limit the best incumbent and proven bound are returned with status
    BUDGET_EXCEEDED.  Extra falsified-reading profiles in warm_profiles are
    evaluated as incumbent candidates along the built-in heuristics.
    """
    errors = validate_attack(net, flows, instance)
    if errors:
        raise ValueError(errors[0])
    bld, model, priority, _ = _assemble(net, flows, instance)
    warm = None
    if warm_start:
        cand = _best_candidate(net, flows, instance, extra=warm_profiles)
        if cand is not None:
            warm = _warm_vector(net, flows, instance, bld, model, cand)
    sol = solve_milp(
        model,
        node_limit=node_limit,
        time_limit=time_limit,
        gap_tol=gap_tol,
        warm_start=warm,
        node_log=node_log,
        branch_priority=priority,
    )
    if sol.x is None:
        return AttackResult(
            kind=instance.kind,
            status=sol.status,
            bound=None if sol.bound is None or not np.isfinite(sol.bound) else float(sol.bound),
            nodes=sol.nodes,
            iterations=sol.iterations,
        )
    return _extract(net, flows, instance, bld, sol)


def attack_admissibility(net, flows, instance, result, tol=1e-7):
    """Re-check an AttackResult against the attack's own rules.

    Independent of the solver: verifies the budget, agreement outside the
    compromised set, nonnegativity, conservation, strict schedulability, and
    that the reported schedule is optimal for the falsified readings.
    Returns a list of violation strings (empty when admissible).
    """
    out = []
    if result.flows is None:
        return ["result carries no falsified flows"]
    fvalues = result.flows.values
    if len(result.compromised) > instance.budget:
        out.append("compromised set exceeds the budget")
    if np.any(fvalues < -tol):
        out.append("negative falsified reading")
    delta = np.abs(fvalues - flows.values)
    for pos in range(net.n_movements):
        if pos not in result.compromised and delta[pos] > tol:
            out.append(f"sensor {pos} changed outside the compromised set")
    for v in check_conservation(net, result.flows, tol=tol):
        out.append(f"conservation violated on link {v.link} by {v.magnitude:.3e}")
    sched = result.schedule
    if sched is not None:
        loads = np.asarray(sched.intersection_loads)
        if np.any(loads > 1.0 - instance.epsilon + tol):
            out.append("an intersection load exceeds the strict limit")
        _, opt_loads, _ = _response(net, fvalues)
        if np.any(np.abs(loads - opt_loads) > 1e-6):
            out.append("reported schedule is not optimal for the falsified flows")
    if instance.kind is AttackKind.RISK_AVERSE and result.objective is not None:
        dev = float(np.max(delta, initial=0.0)) if instance.norm == "inf" else float(
            np.sum(delta)
        )
        if abs(dev - result.objective) > tol * (1.0 + abs(dev)):
            out.append("objective does not match the falsification norm")
    return out


# ----------------------------------------------------------------------
# brute-force oracle


def brute_force_oracle(
    net,
    flows,
    instance,
    value_grid=None,
    *,
    sensor_limit=20,
    budget_limit=4,
):
    """Exhaustive attack search over sensor subsets and a value grid.

    For every subset of at most ``budget`` sensors, candidate readings are the
    grid multiples of the nominal flow (default 0, 1/2, 1, 2) clipped to the
    admissible range; readings pinned by internal-link conservation are
    completed by solving the balance equations for every full-rank pivot set.
    Each profile is scored with a deterministic inner response.  On networks
    where each movement belongs to one stage the search is exact; in general
    it is a certified bound on attack damage.
    """
    errors = validate_attack(net, flows, instance)
    if errors:
        raise ValueError(errors[0])
    if net.n_movements > sensor_limit or instance.budget > budget_limit:
        raise ValueError(
            f"oracle is limited to {sensor_limit} sensors and budget {budget_limit}"
        )
    _check_coverage(net, flows)
    _, ubs = flow_caps(net, flows, instance)
    fvals = flows.values
    mults = tuple(value_grid) if value_grid is not None else (0.0, 0.5, 1.0, 2.0)

    def sensor_values(pos):
        return sorted({min(max(m * float(fvals[pos]), 0.0), float(ubs[pos])) for m in mults})

    balance = []
    for lid in net.internal_links:
        row = {}
        for mpos in net.inflow_movements[lid]:
            row[mpos] = row.get(mpos, 0.0) + 1.0
        for mpos in net.outflow_movements[lid]:
            row[mpos] = row.get(mpos, 0.0) - 1.0
        balance.append(row)

    maximize = instance.kind is AttackKind.WORST_NETWORK
    best_val = None
    best_fv = None
    best_subset = ()
    evals = 0
    seen = set()

    def consider(subset, values):
        nonlocal best_val, best_fv, best_subset, evals
        fv = fvals.copy()
        for pos, v in zip(subset, values):
            fv[pos] = v
        key = tuple(np.round(fv, 10))
        if key in seen:
            return
        seen.add(key)
        evals += 1
        _, loads, service = _response(net, fv)
        if np.any(loads > 1.0 - instance.epsilon + 1e-12):
            return
        if instance.kind is AttackKind.RISK_AVERSE and not _targets_met(
            net, instance, service
        ):
            return
        val = _objective_of(instance.kind, net, flows, instance, fv, service)
        if best_val is None or (val > best_val if maximize else val < best_val):
            best_val, best_fv, best_subset = val, fv, subset

    for k in range(instance.budget + 1):
        for subset in combinations(range(net.n_movements), k):
            rows = [r for r in balance if any(p in r for p in subset)]
            if not rows:
                for values in product(*(sensor_values(p) for p in subset)):
                    consider(subset, values)
                continue
            A = np.array([[r.get(p, 0.0) for p in subset] for r in rows])
            rhs = np.array(
                [-sum(v * fvals[p] for p, v in r.items() if p not in subset) for r in rows]
            )
            r = int(np.linalg.matrix_rank(A)) if A.size else 0
            scale = 1.0 + float(np.max(np.abs(rhs), initial=0.0))
            for pivot in combinations(range(k), r):
                Ap = A[:, pivot]
                if int(np.linalg.matrix_rank(Ap)) != r:
                    continue
                free = [j for j in range(k) if j not in pivot]
                for vals in product(*(sensor_values(subset[j]) for j in free)):
                    rhs2 = rhs - (A[:, free] @ np.array(vals) if free else 0.0)
                    xp, *_ = np.linalg.lstsq(Ap, rhs2, rcond=None)
                    full = np.empty(k)
                    for j, v in zip(free, vals):
                        full[j] = v
                    for j, v in zip(pivot, xp):
                        full[j] = v
                    if np.max(np.abs(A @ full - rhs), initial=0.0) > 1e-9 * scale:
                        continue
                    if np.any(full < -1e-12) or np.any(
                        full > np.array([ubs[subset[j]] for j in range(k)]) + 1e-12
                    ):
                        continue
                    consider(subset, np.clip(full, 0.0, None))

    if best_fv is None:
        return AttackResult(
            kind=instance.kind, status=MilpStatus.INFEASIBLE, nodes=evals
        )
    fractions, _, service = _response(net, best_fv)
    sched = schedule_from_fractions(net, fractions)
    acc = np.maximum(0.0, fvals - service)
    changed = tuple(
        int(p) for p in np.flatnonzero(np.abs(best_fv - fvals) > _CHANGE_TOL)
    )
    return AttackResult(
        kind=instance.kind,
        status=MilpStatus.OPTIMAL,
        objective=float(best_val),
        bound=float(best_val),
        flows=FlowMatrix(best_fv),
        compromised=changed,
        selected=tuple(int(p) for p in best_subset),
        schedule=sched,
        realized_schedule=sched,
        accumulation=acc,
        milp_accumulation=acc,
        realized_objective=float(best_val),
        nodes=evals,
    )


# ----------------------------------------------------------------------
# inner-response soundness probe


def solve_kkt_response(net, flows, *, epsilon=1e-6, sense="min", node_limit=200000):
    """Per-intersection loads obtained purely through the KKT system.

    Fixes the readings, keeps the complementarity binaries, and optimizes the
    stage-fraction sum in the requested direction.  Because the system admits
    only inner-optimal schedules, min and max coincide with the LP optimum;
    comparing against the deterministic solve probes the encoding.
    """
    fvals = flows.values
    loads = np.zeros(len(net.intersections))
    for k, inter in enumerate(net.intersections):
        bld = ModelBuilder(sense)
        for mpos in net.intersection_movements[inter.id]:
            m = net.movements[mpos]
            bld.add_var(_fn(m), float(fvals[mpos]), float(fvals[mpos]))
        _kkt_intersection(bld, net, inter.id, epsilon)
        for s in net.stages_of[inter.id]:
            bld.set_objective(_lamn(s), 1.0)
        sol = solve_milp(bld.build(), node_limit=node_limit)
        if sol.status == MilpStatus.INFEASIBLE:
            raise ValueError(
                f"flows are not admissible at intersection {inter.id}"
            )
        if sol.status != MilpStatus.OPTIMAL:
            raise RuntimeError("KKT response probe hit its node limit")
        loads[k] = float(sol.objective)
    return loads


# ----------------------------------------------------------------------
# attack specification files


_KIND_BY_NAME = {k.value: k for k in AttackKind}


def parse_attack_spec(doc):
    """Build (AttackInstance, oracle grid or None) from a JSON document."""
    if not isinstance(doc, dict):
        raise AttackSpecError("attack spec must be a JSON object")
    known = {
        "kind", "budget", "target_lane", "targets", "norm",
        "epsilon", "flow_bound", "grid",
    }
    unknown = set(doc) - known
    if unknown:
        raise AttackSpecError(f"unknown attack spec field {sorted(unknown)[0]!r}")
    try:
        kind = _KIND_BY_NAME[doc["kind"]]
    except KeyError:
        raise AttackSpecError(
            "attack spec needs a kind of "
            + ", ".join(sorted(_KIND_BY_NAME))
        ) from None
    if "budget" not in doc:
        raise AttackSpecError("attack spec needs a budget")
    budget = doc["budget"]
    if isinstance(budget, bool) or not isinstance(budget, int):
        raise AttackSpecError("budget must be an integer")
    targets = []
    for entry in doc.get("targets", ()):
        try:
            targets.append(
                AttackTarget(int(entry["from"]), int(entry["to"]), float(entry["alpha"]))
            )
        except (TypeError, KeyError, ValueError) as exc:
            raise AttackSpecError(f"malformed target entry: {exc}") from exc
    grid = doc.get("grid")
    if grid is not None:
        try:
            grid = tuple(float(g) for g in grid)
        except (TypeError, ValueError) as exc:
            raise AttackSpecError("grid must be a list of numbers") from exc
    if kind is AttackKind.WORST_LANE and doc.get("target_lane") is None:
        raise AttackSpecError("worst-lane attack spec needs a target_lane")
    if kind is AttackKind.RISK_AVERSE and not targets:
        raise AttackSpecError("risk-averse attack spec needs a non-empty targets list")
    try:
        instance = AttackInstance(
            kind=kind,
            budget=budget,
            target_lane=doc.get("target_lane"),
            targets=tuple(targets),
            norm=doc.get("norm", "inf"),
            epsilon=float(doc.get("epsilon", 1e-6)),
            flow_bound=(
                None if doc.get("flow_bound") is None else float(doc["flow_bound"])
            ),
        )
    except (TypeError, ValueError) as exc:
        raise AttackSpecError(f"malformed attack spec: {exc}") from exc
    return instance, grid


def load_attack_spec(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise AttackSpecError(f"cannot read attack spec {path}: {exc}") from exc
    return parse_attack_spec(doc)
