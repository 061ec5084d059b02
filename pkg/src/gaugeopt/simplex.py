"""Dense two-phase tableau simplex for small linear programs.

Solves  min c'x  s.t.  a x <= b,  lo <= x <= hi  (entries of lo/hi may be
infinite).  The problem is rewritten uniformly: finite bounds become extra
inequality rows, every variable is split x = y+ - y-, slacks turn rows into
equalities, and phase one starts from a full artificial basis.  Instances
here are small and dense, so the classic tableau is the right tool.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .linalg import as_matrix, as_vector

FEAS_TOL = 1e-8
COST_TOL = 1e-9
PIVOT_TOL = 1e-10
DEGENERATE_STEP = 1e-10
#: Degenerate pivots tolerated before switching to Bland's rule.
BLAND_TRIGGER = 50


@dataclass(frozen=True)
class StandardFormLP:
    """min cost'x  s.t.  a x <= b  and per-variable (lower, upper) bounds."""

    cost: np.ndarray
    a: np.ndarray
    b: np.ndarray
    bounds: tuple

    def __post_init__(self):
        object.__setattr__(self, "cost", as_vector(self.cost, "cost"))
        object.__setattr__(self, "a", as_matrix(self.a, "a"))
        object.__setattr__(self, "b", as_vector(self.b, "b"))
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", bounds)
        m, n = self.a.shape
        if self.cost.size != n or self.b.size != m or len(bounds) != n:
            raise ValueError(
                f"inconsistent LP dimensions: a is {m}x{n}, cost {self.cost.size}, "
                f"b {self.b.size}, bounds {len(bounds)}"
            )
        for lo, hi in bounds:
            if lo > hi:
                raise ValueError(f"empty bound interval ({lo}, {hi})")


def free_lp(cost, a, b) -> StandardFormLP:
    """LP with all variables free (the common case for interior finders)."""
    cost = as_vector(cost, "cost")
    bounds = tuple((-np.inf, np.inf) for _ in range(cost.size))
    return StandardFormLP(cost=cost, a=a, b=b, bounds=bounds)


@dataclass(frozen=True)
class LpResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    solution: np.ndarray | None
    objective: float | None
    basis: tuple[int, ...]


def standard_form(lp: StandardFormLP):
    """Internal equality form: min c'y, A y = b (b >= 0), y >= 0.

    Columns are [y+ | y- | slacks]; rows with negative right-hand sides are
    negated.  Exposed so tests can reconstruct dual bounds from a final basis.
    """
    n = lp.cost.size
    rows = [lp.a]
    rhs = [lp.b]
    for j, (lo, hi) in enumerate(lp.bounds):
        if np.isfinite(lo):
            row = np.zeros(n)
            row[j] = -1.0
            rows.append(row.reshape(1, -1))
            rhs.append(np.array([-lo]))
        if np.isfinite(hi):
            row = np.zeros(n)
            row[j] = 1.0
            rows.append(row.reshape(1, -1))
            rhs.append(np.array([hi]))
    a_rows = np.vstack(rows) if rows else np.zeros((0, n))
    b_all = np.concatenate(rhs) if rhs else np.zeros(0)
    m = a_rows.shape[0]

    a_std = np.hstack([a_rows, -a_rows, np.eye(m)])
    c_std = np.concatenate([lp.cost, -lp.cost, np.zeros(m)])
    b_std = b_all.copy()
    flip = b_std < 0
    a_std[flip] *= -1.0
    b_std[flip] *= -1.0
    return a_std, b_std, c_std, n


class _PivotState:
    """Tracks degeneracy so Bland's rule can take over before cycling."""

    def __init__(self, m, n_cols):
        self.degenerate = 0
        self.bland = False
        self.pivots_since_bland = 0
        self.cap = 10 * (m + n_cols)

    def record(self, step):
        if step <= DEGENERATE_STEP:
            self.degenerate += 1
            if self.degenerate >= BLAND_TRIGGER:
                self.bland = True
        if self.bland:
            self.pivots_since_bland += 1
            if self.pivots_since_bland > self.cap:
                raise NumericalError(
                    "simplex exceeded its pivot cap after engaging Bland's rule; "
                    "flagging as numerical failure"
                )


def _pivot(tab, basis, prow, pcol):
    tab[prow] /= tab[prow, pcol]
    for i in range(tab.shape[0]):
        if i != prow and tab[i, pcol] != 0.0:
            tab[i] -= tab[i, pcol] * tab[prow]
    basis[prow] = pcol


def _choose_entering(cost_row, allowed, bland):
    rc = np.where(allowed, cost_row, np.inf)
    if bland:
        neg = np.nonzero(rc < -COST_TOL)[0]
        return int(neg[0]) if neg.size else -1
    j = int(np.argmin(rc))
    return j if rc[j] < -COST_TOL else -1


def _choose_leaving(tab, basis, pcol, m, bland):
    col = tab[:m, pcol]
    rhs = tab[:m, -1]
    best_ratio = np.inf
    prow = -1
    for i in range(m):
        if col[i] > PIVOT_TOL:
            ratio = rhs[i] / col[i]
            if ratio < best_ratio - 1e-12:
                best_ratio, prow = ratio, i
            elif ratio < best_ratio + 1e-12 and prow >= 0:
                # Tie: prefer the smallest basic index (anti-cycling under Bland).
                if bland and basis[i] < basis[prow]:
                    prow = i
    return prow, best_ratio


def _iterate(tab, basis, m, allowed, state, phase, artificial_start=None):
    while True:
        pcol = _choose_entering(tab[m], allowed, state.bland)
        if pcol < 0:
            return "optimal"
        prow, ratio = _choose_leaving(tab, basis, pcol, m, state.bland)
        if prow < 0:
            if phase == 1:
                raise NumericalError("phase-1 subproblem unbounded; numerical failure")
            return "unbounded"
        state.record(ratio)
        leaving = basis[prow]
        _pivot(tab, basis, prow, pcol)
        if artificial_start is not None and leaving >= artificial_start:
            # An artificial that left the basis is never needed again.
            allowed[leaving] = False


def solve_lp(lp: StandardFormLP) -> LpResult:
    """Two-phase simplex with Dantzig pricing and a Bland's-rule fallback."""
    a_std, b_std, c_std, n = standard_form(lp)
    m, n_cols = a_std.shape

    if m == 0:
        # No constraints at all: optimal at 0 iff no improving direction.
        if np.any(np.abs(lp.cost) > COST_TOL):
            return LpResult(status="unbounded", solution=None, objective=None, basis=())
        x = np.zeros(n)
        return LpResult(status="optimal", solution=x, objective=0.0, basis=())

    # Phase 1: artificial basis, minimize the sum of artificials.
    tab = np.zeros((m + 1, n_cols + m + 1))
    tab[:m, :n_cols] = a_std
    tab[:m, n_cols : n_cols + m] = np.eye(m)
    tab[:m, -1] = b_std
    tab[m, :n_cols] = -a_std.sum(axis=0)
    tab[m, -1] = -b_std.sum()
    basis = list(range(n_cols, n_cols + m))
    state = _PivotState(m, n_cols + m)

    allowed = np.ones(n_cols + m + 1, dtype=bool)
    allowed[-1] = False
    _iterate(tab, basis, m, allowed, state, phase=1, artificial_start=n_cols)
    phase1_obj = -tab[m, -1]
    if phase1_obj > FEAS_TOL:
        return LpResult(status="infeasible", solution=None, objective=None, basis=())

    # Drive remaining artificials out of the basis where possible.
    for i in range(m):
        if basis[i] >= n_cols:
            row = tab[i, :n_cols]
            cols = np.nonzero(np.abs(row) > PIVOT_TOL)[0]
            if cols.size:
                _pivot(tab, basis, i, int(cols[0]))

    # Phase 2: rebuild reduced costs for the true objective.
    allowed[n_cols : n_cols + m] = False
    tab[m, :] = 0.0
    tab[m, :n_cols] = c_std
    for i in range(m):
        if basis[i] < n_cols and c_std[basis[i]] != 0.0:
            tab[m] -= c_std[basis[i]] * tab[i]
    status = _iterate(tab, basis, m, allowed, state, phase=2)
    if status == "unbounded":
        return LpResult(status="unbounded", solution=None, objective=None, basis=())

    y = np.zeros(n_cols)
    for i in range(m):
        if basis[i] < n_cols:
            y[basis[i]] = tab[i, -1]
    x = y[:n] - y[n : 2 * n]
    objective = float(lp.cost @ x)

    residual = lp.a @ x - lp.b
    worst = float(residual.max()) if residual.size else 0.0
    for j, (lo, hi) in enumerate(lp.bounds):
        worst = max(worst, lo - x[j] if np.isfinite(lo) else -np.inf,
                    x[j] - hi if np.isfinite(hi) else -np.inf)
    if worst > FEAS_TOL:
        raise NumericalError(f"optimal tableau violates feasibility by {worst:.3e}")

    return LpResult(status="optimal", solution=x, objective=objective, basis=tuple(basis))
