"""Dense linear programming with a bounded-variable primal simplex.

The solver works on ``min/max c'x  s.t.  A x (<=,=,>=) b,  l <= x <= u`` with
infinite bounds allowed.  Internally every row gets a slack variable and an
artificial variable; phase 1 minimizes the artificial sum from the all-slack
point, phase 2 optimizes the real objective.  Nonbasic variables rest on a
bound (or at zero when free), and the ratio test performs bound flips, so
upper bounds never become extra rows.

Pivot selection is Dantzig's rule with lowest-index tie-breaking; after a
configurable streak of consecutive degenerate pivots the solver switches to
Bland's rule until progress resumes, which guarantees termination.  All
choices are deterministic: identical inputs produce identical pivot
sequences, vertices, and iteration counts.
"""

import enum
from dataclasses import dataclass

import numpy as np

try:
    from scipy.linalg.blas import dger as _dger
except Exception:  # pragma: no cover - scipy is a hard dependency in practice
    _dger = None

# row relations
LE, EQ, GE = -1, 0, 1

_BASIC, _AT_LOWER, _AT_UPPER, _FREE = 0, 1, 2, 3

_DEGEN_TOL = 1e-12
_PIV_TOL = 1e-10


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


class LpNumericalError(RuntimeError):
    """The final basic solution failed the feasibility re-check."""


@dataclass
class LpModel:
    """min or max of c'x subject to A x (rel) b and l <= x <= u."""

    c: np.ndarray
    A: np.ndarray
    rel: np.ndarray
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    sense: str = "min"

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.asarray(self.A, dtype=float)
        if self.A.ndim != 2:
            self.A = self.A.reshape(-1, self.c.size)
        self.rel = np.asarray(self.rel, dtype=np.int8)
        self.b = np.asarray(self.b, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)

    @property
    def n_vars(self):
        return self.c.size

    @property
    def n_rows(self):
        return self.b.size

    def validate(self):
        m, n = self.A.shape if self.A.size else (self.b.size, self.c.size)
        if self.c.size != n:
            raise ValueError("objective length does not match column count")
        if self.b.size != m or self.rel.size != m:
            raise ValueError("row count mismatch between A, rel, and b")
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("bound arrays must have one entry per variable")
        if not np.all(np.isfinite(self.A)):
            raise ValueError("constraint matrix must be finite")
        if not np.all(np.isfinite(self.b)):
            raise ValueError("right-hand side must be finite")
        if not np.all(np.isfinite(self.c)):
            raise ValueError("objective must be finite")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise ValueError("bounds must not be NaN")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        if not np.all(np.isin(self.rel, (LE, EQ, GE))):
            raise ValueError("row relations must be LE, EQ, or GE")
        if self.sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")

    def copy_with_bounds(self, lower, upper):
        return LpModel(self.c, self.A, self.rel, self.b, lower, upper, self.sense)


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray = None
    objective: float = None
    duals: np.ndarray = None
    reduced_costs: np.ndarray = None
    dual_objective: float = None
    iterations: int = 0
    bland_engaged: bool = False


def _rank_one_update(T, col, row):
    """T -= outer(col, row), in place when BLAS allows it."""
    if _dger is not None and T.size:
        # update the transpose view so the array is Fortran-contiguous
        res = _dger(-1.0, row, col, a=T.T, overwrite_a=1)
        return res.T
    T -= np.multiply.outer(col, row)
    return T


class _Simplex:
    def __init__(self, model, feas_tol, opt_tol, max_iter, bland_after):
        self.orig = model
        self.feas_tol = feas_tol
        self.opt_tol = opt_tol
        self.bland_after = bland_after
        self.mult = 1.0 if model.sense == "min" else -1.0

        keep = []
        self.empty_infeasible = False
        for i in range(model.n_rows):
            if model.A.size and np.any(model.A[i] != 0.0):
                keep.append(i)
                continue
            bi = model.b[i]
            tol = feas_tol * (1.0 + abs(bi))
            r = model.rel[i]
            if (r == LE and bi < -tol) or (r == GE and bi > tol) or (r == EQ and abs(bi) > tol):
                self.empty_infeasible = True
        self.keep = np.array(keep, dtype=int)

        self.A = model.A[self.keep] if model.A.size else model.A.reshape(0, model.n_vars)
        self.b = model.b[self.keep]
        self.rel = model.rel[self.keep]
        self.m, self.n = self.A.shape
        self.iterations = 0
        self.bland_engaged = False
        if max_iter is None:
            max_iter = 20 * (self.m + self.n) + 2000
        self.max_iter = max_iter

    def setup(self):
        m, n = self.m, self.n
        n_t = n + m
        N = n + 2 * m
        self.n_t = n_t
        self.N = N

        W = np.zeros((m, N))
        if self.A.size:
            W[:, :n] = self.A
        W[np.arange(m), n + np.arange(m)] = 1.0

        lo = np.empty(N)
        up = np.empty(N)
        lo[:n] = self.orig.lower
        up[:n] = self.orig.upper
        for i, r in enumerate(self.rel):
            if r == LE:
                lo[n + i], up[n + i] = 0.0, np.inf
            elif r == GE:
                lo[n + i], up[n + i] = -np.inf, 0.0
            else:
                lo[n + i], up[n + i] = 0.0, 0.0
        lo[n_t:] = 0.0
        up[n_t:] = np.inf

        status = np.empty(N, dtype=np.int8)
        for j in range(n_t):
            if np.isfinite(lo[j]):
                status[j] = _AT_LOWER
            elif np.isfinite(up[j]):
                status[j] = _AT_UPPER
            else:
                status[j] = _FREE
        status[n_t:] = _BASIC

        vals = np.where(status[:n_t] == _AT_LOWER, lo[:n_t], 0.0)
        vals = np.where(status[:n_t] == _AT_UPPER, up[:n_t], vals)
        r0 = self.b - W[:, :n_t] @ vals
        sigma = np.where(r0 >= 0.0, 1.0, -1.0)
        W[np.arange(m), n_t + np.arange(m)] = sigma

        self.T = W * sigma[:, None]
        self.beta = np.abs(r0)
        self.basis = n_t + np.arange(m)
        self.lo, self.up, self.status = lo, up, status
        self.cost2 = np.zeros(N)
        self.cost2[:n] = self.mult * self.orig.c
        # pristine copy of the scaled system, for refactorization
        self.W0 = self.T.copy()
        self.b0 = sigma * self.b
        self.refactors = 0

    def _value_of(self, j):
        s = self.status[j]
        if s == _AT_LOWER:
            return self.lo[j]
        if s == _AT_UPPER:
            return self.up[j]
        return 0.0

    def _full_point(self):
        x = np.where(self.status == _AT_UPPER, self.up, self.lo)
        x[self.status == _FREE] = 0.0
        x[~np.isfinite(x)] = 0.0
        x[self.basis] = self.beta
        return x

    def _maybe_refactor(self, d_row, cost, force=False):
        """Rebuild T and beta from the basis once rank-1 drift shows.

        The tableau accumulates floating-point error over many updates; on
        large models the basic values can wander off the true system.  The
        residual check is cheap, the rebuild is one dense solve against the
        pristine matrix.  Returns (d_row, rebuilt).
        """
        if not self.m:
            return d_row, False
        scale = 1.0 + (float(np.max(np.abs(self.b0))) if self.b0.size else 0.0)
        if not force:
            resid = self.b0 - self.W0 @ self._full_point()
            # rebuild at a quarter of what the final verification tolerates
            if float(np.max(np.abs(resid))) <= 2.5 * self.feas_tol * scale:
                return d_row, False
        B = self.W0[:, self.basis]
        nb_vals = self._full_point()
        nb_vals[self.basis] = 0.0
        try:
            self.T = np.linalg.solve(B, self.W0)
            self.beta = np.linalg.solve(B, self.b0 - self.W0 @ nb_vals)
        except np.linalg.LinAlgError as exc:
            raise LpNumericalError(f"refactorization hit a singular basis: {exc}") from exc
        d_row = cost - cost[self.basis] @ self.T
        d_row[self.basis] = 0.0
        self.refactors += 1
        return d_row, True

    def _iterate(self, d_row, cost, phase):
        """Run simplex pivots until optimal/unbounded/limit for this phase."""
        lo, up, status, T, basis = self.lo, self.up, self.status, self.T, self.basis
        streak = 0
        while True:
            if self.iterations >= self.max_iter:
                return d_row, "limit"
            if self.iterations and self.iterations % 128 == 0:
                d_row, rebuilt = self._maybe_refactor(d_row, cost)
                if rebuilt:
                    T = self.T
            span = up - lo
            nonbasic = status != _BASIC
            movable = nonbasic & (span > 0)
            elig = movable & (
                ((status == _AT_LOWER) & (d_row < -self.opt_tol))
                | ((status == _AT_UPPER) & (d_row > self.opt_tol))
                | ((status == _FREE) & (np.abs(d_row) > self.opt_tol))
            )
            if not np.any(elig):
                return d_row, "optimal"
            use_bland = streak >= self.bland_after
            if use_bland:
                self.bland_engaged = True
                e = int(np.argmax(elig))
            else:
                scores = np.where(elig, np.abs(d_row), -1.0)
                e = int(np.argmax(scores))
            if status[e] == _AT_UPPER:
                sig = -1.0
            elif status[e] == _AT_LOWER:
                sig = 1.0
            else:
                sig = 1.0 if d_row[e] < 0 else -1.0

            col = T[:, e].copy()
            move = sig * col
            if self.m:
                blo = lo[basis]
                bup = up[basis]
                with np.errstate(divide="ignore", invalid="ignore"):
                    t_dec = np.where(
                        (move > _PIV_TOL) & np.isfinite(blo),
                        (self.beta - blo) / move,
                        np.inf,
                    )
                    t_inc = np.where(
                        (move < -_PIV_TOL) & np.isfinite(bup),
                        (bup - self.beta) / (-move),
                        np.inf,
                    )
                t_rows = np.maximum(np.minimum(t_dec, t_inc), 0.0)
                t_row_min = float(t_rows.min()) if t_rows.size else np.inf
            else:
                t_rows = np.empty(0)
                t_row_min = np.inf

            span_e = span[e]
            if span_e <= t_row_min:
                t = span_e
                if not np.isfinite(t):
                    return d_row, "unbounded" if phase == 2 else "phase1-unbounded"
                self.beta -= move * t
                status[e] = _AT_UPPER if status[e] == _AT_LOWER else _AT_LOWER
                self.iterations += 1
                streak = streak + 1 if t <= _DEGEN_TOL else 0
                continue

            t = t_row_min
            if not np.isfinite(t):
                return d_row, "unbounded" if phase == 2 else "phase1-unbounded"
            # among (near-)tied rows, prefer a large pivot for stability
            cand = np.flatnonzero(t_rows <= t + 1e-12 * (1.0 + t))
            mags = np.abs(move[cand])
            cand = cand[mags >= 0.9 * float(mags.max())]
            r = int(cand[np.argmin(basis[cand])])
            leave = int(basis[r])

            enter_val = self._value_of(e) + sig * t
            if t > 0:
                self.beta -= move * t
            self.beta[r] = enter_val
            status[leave] = _AT_LOWER if move[r] > 0 else _AT_UPPER
            if phase == 1 and leave >= self.n_t:
                # retire artificials for good once they leave the basis
                lo[leave] = up[leave] = 0.0
                status[leave] = _AT_LOWER
            basis[r] = e
            status[e] = _BASIC

            piv = T[r, e]
            T[r] /= piv
            colv = T[:, e].copy()
            colv[r] = 0.0
            self.T = T = _rank_one_update(T, colv, T[r])
            d_row -= d_row[e] * T[r]
            self.iterations += 1
            streak = streak + 1 if t <= _DEGEN_TOL else 0

    def _drive_out_artificials(self):
        T, basis, status = self.T, self.basis, self.status
        for r in range(self.m):
            if basis[r] < self.n_t:
                continue
            row = T[r, : self.n_t]
            candidates = np.flatnonzero(
                (np.abs(row) > _PIV_TOL) & (status[: self.n_t] != _BASIC)
            )
            if candidates.size == 0:
                continue  # redundant row; artificial stays pinned at zero
            e = int(candidates[np.argmax(np.abs(row[candidates]))])
            leave = int(basis[r])
            enter_val = self._value_of(e)
            self.beta[r] = enter_val
            status[leave] = _AT_LOWER
            basis[r] = e
            status[e] = _BASIC
            piv = T[r, e]
            T[r] /= piv
            colv = T[:, e].copy()
            colv[r] = 0.0
            self.T = T = _rank_one_update(T, colv, T[r])

    def solve(self):
        if self.empty_infeasible:
            return LpSolution(status=LpStatus.INFEASIBLE, iterations=0)
        self.setup()

        cost1 = np.zeros(self.N)
        cost1[self.n_t:] = 1.0
        d1 = cost1 - self.T.sum(axis=0)
        # artificials start basic with unit cost, so d1 over them is zero
        for _ in range(4):
            d1, outcome = self._iterate(d1, cost1, phase=1)
            if outcome == "limit":
                return LpSolution(status=LpStatus.ITERATION_LIMIT, iterations=self.iterations,
                                  bland_engaged=self.bland_engaged)
            if outcome == "phase1-unbounded":
                raise LpNumericalError("phase 1 reported an unbounded direction")
            # drift can fake phase-1 convergence; rebuild and re-check
            d1, rebuilt = self._maybe_refactor(d1, cost1)
            if not rebuilt:
                break

        art = self.basis >= self.n_t
        inf_sum = float(self.beta[art].sum()) if np.any(art) else 0.0
        scale = 1.0 + (float(np.max(np.abs(self.b))) if self.b.size else 0.0)
        if inf_sum > self.feas_tol * scale:
            return LpSolution(status=LpStatus.INFEASIBLE, iterations=self.iterations,
                              bland_engaged=self.bland_engaged)

        self._drive_out_artificials()
        self.lo[self.n_t:] = 0.0
        self.up[self.n_t:] = 0.0

        d2 = self.cost2 - self.cost2[self.basis] @ self.T
        for attempt in range(4):
            d2, outcome = self._iterate(d2, self.cost2, phase=2)
            if outcome == "limit":
                return LpSolution(status=LpStatus.ITERATION_LIMIT, iterations=self.iterations,
                                  bland_engaged=self.bland_engaged)
            if outcome == "unbounded":
                return LpSolution(status=LpStatus.UNBOUNDED, iterations=self.iterations,
                                  bland_engaged=self.bland_engaged)
            try:
                return self._extract(d2)
            except LpNumericalError:
                if attempt == 3:
                    raise
                d2, _ = self._maybe_refactor(d2, self.cost2, force=True)
        raise LpNumericalError("simplex could not stabilize the final basis")

    def _extract(self, d_row):
        x_full = np.where(self.status == _AT_UPPER, self.up, self.lo)
        x_full[self.status == _FREE] = 0.0
        x_full[~np.isfinite(x_full)] = 0.0
        x_full[self.basis] = self.beta
        x = x_full[: self.n].copy()

        obj_min = float(self.cost2[: self.n] @ x)
        duals_min = np.zeros(self.orig.n_rows)
        red_min = d_row[: self.n].copy()
        if self.m:
            duals_min[self.keep] = -d_row[self.n : self.n_t]
        nb = (self.status[: self.n] != _BASIC)
        bound_part = float(np.sum(np.where(nb, red_min * x, 0.0)))
        dual_min = float(self.b @ (-d_row[self.n : self.n_t])) + bound_part if self.m else bound_part

        self._verify(x)

        mult = self.mult
        return LpSolution(
            status=LpStatus.OPTIMAL,
            x=x,
            objective=mult * obj_min,
            duals=mult * duals_min,
            reduced_costs=mult * red_min,
            dual_objective=mult * dual_min,
            iterations=self.iterations,
            bland_engaged=self.bland_engaged,
        )

    def _verify(self, x):
        model = self.orig
        if model.A.size:
            act = model.A @ x
        else:
            act = np.zeros(model.n_rows)
        for i in range(model.n_rows):
            tol = self.feas_tol * (1.0 + abs(model.b[i])) * 10.0
            diff = act[i] - model.b[i]
            r = model.rel[i]
            if (r == LE and diff > tol) or (r == GE and diff < -tol) or (r == EQ and abs(diff) > tol):
                raise LpNumericalError(
                    f"row {i} violated by {diff:.3e} in final solution"
                )
        btol = self.feas_tol * (1.0 + np.abs(x)) * 10.0
        if np.any(x < model.lower - btol) or np.any(x > model.upper + btol):
            raise LpNumericalError("variable bound violated in final solution")


def solve_lp(model, *, feas_tol=1e-9, opt_tol=1e-9, max_iter=None, bland_after=40):
    """Solve an LpModel.  Deterministic: same model, same result bit for bit."""
    model.validate()
    solver = _Simplex(model, feas_tol, opt_tol, max_iter, bland_after)
    try:
        return solver.solve()
    except LpNumericalError:
        if bland_after == 0:
            raise
        # a different deterministic pivot path often sidesteps the breakdown
        retry = _Simplex(model, feas_tol, opt_tol, max_iter, 0)
        return retry.solve()


def solve_lp_fixed(model, fixed, **kwargs):
    """Solve with some variables pinned to values inside their bounds."""
    lower = model.lower.copy()
    upper = model.upper.copy()
    for idx, val in fixed.items():
        if not 0 <= idx < model.n_vars:
            raise ValueError(f"fixed variable index {idx} out of range")
        tol = 1e-9 * (1.0 + abs(val))
        if val < model.lower[idx] - tol or val > model.upper[idx] + tol:
            raise ValueError(
                f"fixed value {val} outside bounds of variable {idx}"
            )
        lower[idx] = upper[idx] = val
    return solve_lp(model.copy_with_bounds(lower, upper), **kwargs)


_REL_TEXT = {LE: "<=", EQ: "=", GE: ">="}


def lp_text(model, names=None):
    """Human-readable dump of a model, for debugging."""
    n = model.n_vars
    if names is None:
        names = [f"x{j}" for j in range(n)]

    def expr(coeffs):
        parts = []
        for j, a in enumerate(coeffs):
            if a == 0:
                continue
            parts.append(f"{'+' if a >= 0 and parts else ''}{a:g} {names[j]}")
        return " ".join(parts) if parts else "0"

    lines = [f"{model.sense} {expr(model.c)}", "subject to"]
    for i in range(model.n_rows):
        row = model.A[i] if model.A.size else np.zeros(n)
        lines.append(f"  r{i}: {expr(row)} {_REL_TEXT[int(model.rel[i])]} {model.b[i]:g}")
    lines.append("bounds")
    for j in range(n):
        lines.append(f"  {model.lower[j]:g} <= {names[j]} <= {model.upper[j]:g}")
    return "\n".join(lines)
