"""Mixed binary-integer programming by branch and bound on LP relaxations.

The engine is deliberately plain: no cuts, no presolve beyond the LP's own,
no heuristics.  Node exploration is depth-first (down-branch first) until the
search finds its first incumbent, then best-bound with lowest-node-id
tie-breaking.  Branching picks the most fractional binary (closest to 0.5),
lowest index on ties; callers may supply priority tiers so structurally
decisive binaries are resolved first.  Everything is deterministic: identical
models produce identical node counts, incumbents, and bounds.

``ModelBuilder`` is a small helper for assembling models with named
variables; ``linearize_product`` adds the exact envelope for a product of a
binary and a bounded continuous variable.
"""

import enum
import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from .simplex import (
    EQ,
    GE,
    LE,
    LpModel,
    LpStatus,
    solve_lp,
)


class MilpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    # solver resource budget (nodes or wall clock), not the attacker budget
    BUDGET_EXCEEDED = "budget_exceeded"


@dataclass
class MilpModel:
    lp: LpModel
    binary: np.ndarray

    def __post_init__(self):
        self.binary = np.asarray(self.binary, dtype=bool)

    def validate(self):
        self.lp.validate()
        if self.binary.size != self.lp.n_vars:
            raise ValueError("binary mask length must match variable count")
        if np.any(self.lp.lower[self.binary] < -1e-12) or np.any(
            self.lp.upper[self.binary] > 1.0 + 1e-12
        ):
            raise ValueError("binary variables must have bounds within [0, 1]")


@dataclass
class MilpSolution:
    status: MilpStatus
    x: np.ndarray = None
    objective: float = None
    bound: float = None
    nodes: int = 0
    iterations: int = 0


def solution_violations(model, x, tol=1e-7, int_tol=1e-6):
    """Constraint/bound/integrality violations of ``x`` against the model."""
    lp = model.lp
    out = []
    act = lp.A @ x if lp.A.size else np.zeros(lp.n_rows)
    for i in range(lp.n_rows):
        rtol = tol * (1.0 + abs(lp.b[i]))
        diff = act[i] - lp.b[i]
        r = lp.rel[i]
        if (r == LE and diff > rtol) or (r == GE and diff < -rtol) or (
            r == EQ and abs(diff) > rtol
        ):
            out.append(f"row {i} violated by {diff:.3e}")
    btol = tol * (1.0 + np.abs(x))
    for j in np.flatnonzero(x < lp.lower - btol):
        out.append(f"variable {j} below lower bound")
    for j in np.flatnonzero(x > lp.upper + btol):
        out.append(f"variable {j} above upper bound")
    for j in np.flatnonzero(model.binary):
        if abs(x[j] - round(x[j])) > int_tol:
            out.append(f"binary variable {j} fractional ({x[j]:.6g})")
    return out


@dataclass(order=True)
class _Node:
    sort_bound: float
    node_id: int
    depth: int = field(compare=False)
    fixes: dict = field(compare=False)
    bound: float = field(compare=False)


def solve_milp(
    model,
    *,
    node_limit=None,
    time_limit=None,
    gap_tol=1e-6,
    int_tol=1e-6,
    warm_start=None,
    node_log=None,
    feas_tol=1e-9,
    opt_tol=1e-9,
    lp_max_iter=None,
    branch_priority=None,
):
    """Branch and bound.  Returns a MilpSolution.

    ``warm_start`` may carry a feasible assignment used as the initial
    incumbent; it is validated against the unrelaxed model and rejected with
    ValueError if it does not satisfy it.  ``branch_priority`` optionally
    assigns an integer tier per variable; fractional binaries in the lowest
    tier are branched first (most fractional within the tier).  When a node
    or time limit stops the search, the best incumbent and the proven bound
    are returned with status BUDGET_EXCEEDED; the answer is never silently
    wrong.
    """
    model.validate()
    lp = model.lp
    mult = 1.0 if lp.sense == "min" else -1.0
    bin_idx = np.flatnonzero(model.binary)
    prio_b = None
    if branch_priority is not None:
        prio = np.asarray(branch_priority, dtype=int)
        if prio.size != lp.n_vars:
            raise ValueError("branch_priority length must match variable count")
        prio_b = prio[bin_idx]
    t0 = time.monotonic()

    if node_log is not None:
        node_log.write("node,depth,bound,incumbent\n")

    inc_x = None
    inc_obj = None  # in posed sense

    if warm_start is not None:
        warm = np.asarray(warm_start, dtype=float)
        problems = solution_violations(model, warm, tol=1e-7, int_tol=int_tol)
        if problems:
            raise ValueError(f"warm start is not feasible: {problems[0]}")
        inc_x = warm.copy()
        inc_obj = float(lp.c @ warm)

    def better(a, b):
        # is posed-sense objective a strictly better than b
        return b is None or mult * a < mult * b

    def gap_value():
        return gap_tol * (1.0 + (abs(inc_obj) if inc_obj is not None else 0.0))

    def solve_node(fixes):
        lower = lp.lower.copy()
        upper = lp.upper.copy()
        for j, v in fixes.items():
            lower[j] = upper[j] = v
        return solve_lp(
            lp.copy_with_bounds(lower, upper),
            feas_tol=feas_tol,
            opt_tol=opt_tol,
            max_iter=lp_max_iter,
        )

    nodes_processed = 0
    lp_iterations = 0
    next_id = 0
    # stack for the initial dive, heap once an incumbent is found by search
    stack = []
    heap = []
    diving = True
    found_by_search = False

    root = _Node(sort_bound=-mult * np.inf, node_id=0, depth=0, fixes={}, bound=-mult * np.inf)
    next_id = 1
    stack.append(root)

    budget_hit = False

    def open_bound():
        vals = [nd.bound for nd in stack] + [nd.bound for nd in heap]
        if not vals:
            return None
        return min(vals, key=lambda v: mult * v)

    while stack or heap:
        if node_limit is not None and nodes_processed >= node_limit:
            budget_hit = True
            break
        if time_limit is not None and time.monotonic() - t0 > time_limit:
            budget_hit = True
            break

        if diving and stack:
            node = stack.pop()
        elif stack:
            # switch modes: move remaining dive nodes onto the heap
            for nd in stack:
                heapq.heappush(heap, nd)
            stack = []
            node = heapq.heappop(heap)
        else:
            node = heapq.heappop(heap)

        # prune against incumbent using the parent bound
        if inc_obj is not None and np.isfinite(node.bound):
            if mult * node.bound >= mult * inc_obj - gap_value():
                continue

        sol = solve_node(node.fixes)
        nodes_processed += 1
        lp_iterations += sol.iterations
        if sol.status == LpStatus.ITERATION_LIMIT:
            raise RuntimeError(
                "node LP hit the iteration limit; raise lp_max_iter"
            )
        if sol.status == LpStatus.UNBOUNDED:
            raise RuntimeError("relaxation is unbounded; add finite bounds")
        if node_log is not None:
            node_log.write(
                f"{node.node_id},{node.depth},"
                f"{'' if sol.status != LpStatus.OPTIMAL else repr(sol.objective)},"
                f"{'' if inc_obj is None else repr(inc_obj)}\n"
            )
        if sol.status == LpStatus.INFEASIBLE:
            continue

        bound_here = sol.objective
        if inc_obj is not None and mult * bound_here >= mult * inc_obj - gap_value():
            continue

        xb = sol.x[bin_idx] if bin_idx.size else np.empty(0)
        frac = np.abs(xb - np.round(xb))

        def branch(pick):
            nonlocal next_id
            children = [{**node.fixes, pick: 0.0}, {**node.fixes, pick: 1.0}]
            if diving:
                children.reverse()  # LIFO stack pops the down-branch first
            for fixes_child in children:
                child = _Node(
                    sort_bound=mult * bound_here,
                    node_id=next_id,
                    depth=node.depth + 1,
                    fixes=fixes_child,
                    bound=bound_here,
                )
                next_id += 1
                if diving:
                    stack.append(child)
                else:
                    heapq.heappush(heap, child)

        def most_fractional():
            scores = np.abs(xb - 0.5)
            scores[frac <= int_tol] = np.inf
            if prio_b is not None:
                best_tier = prio_b[frac > int_tol].min()
                scores[prio_b != best_tier] = np.inf
            return int(bin_idx[int(np.argmin(scores))])

        if np.all(frac <= int_tol):
            free = [int(j) for j in bin_idx if j not in node.fixes]
            if free:
                # re-solve with every binary pinned to its rounded value so
                # big-M rows see exact zeros and ones
                fixes = dict(node.fixes)
                for j in free:
                    fixes[j] = float(np.round(sol.x[j]))
                pinned = solve_node(fixes)
                nodes_processed += 1
                lp_iterations += pinned.iterations
                if pinned.status != LpStatus.OPTIMAL:
                    # rounding cut the point off; pin free binaries one by one
                    branch(free[0])
                    continue
                cand_x, cand_obj = pinned.x, pinned.objective
            else:
                cand_x, cand_obj = sol.x, sol.objective
            if better(cand_obj, inc_obj):
                inc_obj = float(cand_obj)
                inc_x = cand_x.copy()
            if not found_by_search:
                found_by_search = True
                diving = False
            continue

        branch(most_fractional())

    if budget_hit:
        ob = open_bound()
        if inc_obj is not None and ob is not None:
            bound = ob if mult * ob < mult * inc_obj else inc_obj
        elif inc_obj is not None:
            bound = inc_obj
        else:
            bound = ob if ob is not None else -mult * np.inf
        return MilpSolution(
            status=MilpStatus.BUDGET_EXCEEDED,
            x=inc_x,
            objective=inc_obj,
            bound=float(bound),
            nodes=nodes_processed,
            iterations=lp_iterations,
        )

    if inc_obj is None:
        return MilpSolution(
            status=MilpStatus.INFEASIBLE,
            bound=np.nan,
            nodes=nodes_processed,
            iterations=lp_iterations,
        )
    return MilpSolution(
        status=MilpStatus.OPTIMAL,
        x=inc_x,
        objective=inc_obj,
        bound=inc_obj,
        nodes=nodes_processed,
        iterations=lp_iterations,
    )


# ----------------------------------------------------------------------
# model assembly


class ModelBuilder:
    """Accumulates named variables and rows, then emits a MilpModel."""

    def __init__(self, sense="min"):
        self.sense = sense
        self._names = []
        self._index = {}
        self._lower = []
        self._upper = []
        self._obj = []
        self._binary = []
        self._rows = []  # (coeff dict by index, rel, rhs)

    def add_var(self, name, lb=0.0, ub=np.inf, obj=0.0, binary=False):
        if name in self._index:
            raise ValueError(f"duplicate variable name {name!r}")
        if binary:
            lb = max(lb, 0.0)
            ub = min(ub, 1.0)
        idx = len(self._names)
        self._names.append(name)
        self._index[name] = idx
        self._lower.append(lb)
        self._upper.append(ub)
        self._obj.append(obj)
        self._binary.append(binary)
        return idx

    def index(self, name):
        return self._index[name]

    def set_objective(self, name, coeff):
        self._obj[self._index[name]] = coeff

    def _row(self, coeffs, rel, rhs):
        by_idx = {}
        for key, val in coeffs.items():
            idx = self._index[key] if isinstance(key, str) else key
            by_idx[idx] = by_idx.get(idx, 0.0) + val
        self._rows.append((by_idx, rel, float(rhs)))

    def add_le(self, coeffs, rhs):
        self._row(coeffs, LE, rhs)

    def add_ge(self, coeffs, rhs):
        self._row(coeffs, GE, rhs)

    def add_eq(self, coeffs, rhs):
        self._row(coeffs, EQ, rhs)

    @property
    def n_vars(self):
        return len(self._names)

    @property
    def names(self):
        return tuple(self._names)

    def build(self):
        n = len(self._names)
        m = len(self._rows)
        A = np.zeros((m, n))
        rel = np.zeros(m, dtype=np.int8)
        b = np.zeros(m)
        for i, (coeffs, r, rhs) in enumerate(self._rows):
            for j, v in coeffs.items():
                A[i, j] = v
            rel[i] = r
            b[i] = rhs
        lp = LpModel(
            c=np.array(self._obj, dtype=float),
            A=A,
            rel=rel,
            b=b,
            lower=np.array(self._lower, dtype=float),
            upper=np.array(self._upper, dtype=float),
            sense=self.sense,
        )
        return MilpModel(lp=lp, binary=np.array(self._binary, dtype=bool))


def linearize_product(builder, binary_name, cont_name, ub, product_name=None):
    """Add w = binary * continuous for a continuous variable in [0, ub].

    Emits the four-row envelope ``w <= ub*y``, ``w <= x``, ``w >= x - ub*(1-y)``,
    ``w >= 0``, which is exact at integral y.  Returns the product variable
    name.  ``ub`` must be finite.
    """
    if not np.isfinite(ub):
        raise ValueError("product linearization needs a finite upper bound")
    if product_name is None:
        product_name = f"prod[{binary_name},{cont_name}]"
    builder.add_var(product_name, lb=0.0, ub=ub)
    builder.add_le({product_name: 1.0, binary_name: -ub}, 0.0)
    builder.add_le({product_name: 1.0, cont_name: -1.0}, 0.0)
    builder.add_ge({product_name: 1.0, cont_name: -1.0, binary_name: -ub}, -ub)
    return product_name
