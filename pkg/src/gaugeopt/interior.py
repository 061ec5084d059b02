"""Interior-point finders for the reduced polytope { u : a_red u + B x + b <= 0 }.

Three strategies:

* artificial LP -- minimize a shared slack u_a over
  a_red u + B x + b - 1 u_a <= 0; a strict interior exists iff the optimal
  u_a is negative, and the minimizer is then a max-margin interior point.
* basic-feasible-point averaging -- enumerate the basic feasible points of
  the slack (equational) form and average them; convexity makes the mean
  interior whenever the algebraic interior is nonempty.
* two-phase -- run the full learned pipeline on the artificial problem
  itself, whose interior point [u; ||a_red u + B x + b||_2] is known in
  closed form, and read an interior point off the prediction.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.linalg

from .errors import (
    EmptyInteriorError,
    EnumerationCapError,
    InfeasibleError,
    NumericalError,
    PredictionMissError,
    RankDeficientError,
    UnboundedError,
)
from .linalg import as_vector, freeze, greedy_independent_columns, worker_count, PIVOT_TOL
from .problems import LinConProblem, ObjectiveHandle
from .reduction import ReducedProblem, reduce_problem
from .simplex import free_lp, solve_lp

DEFAULT_BIG_M = 1e4
DEFAULT_UA_CAP = 1e3
#: Slack-nonnegativity tolerance when accepting basic points.
BFS_ACCEPT_TOL = 1e-10
#: Margins above this (signed) count as "no strict interior".
INTERIOR_TOL = -1e-9


@dataclass(frozen=True)
class InteriorResult:
    point: np.ndarray
    margin: float
    method: str


def verify_interior(red: ReducedProblem, x, point) -> float:
    """Most-violated signed slack; negative means strictly interior."""
    x = as_vector(x, "x")
    point = as_vector(point, "point")
    return float(np.max(red.ineq_residual(point, x)))


def find_interior_artificial(red: ReducedProblem, x, big_m=DEFAULT_BIG_M) -> InteriorResult:
    """Solve the artificial slack LP; error when no strict interior exists."""
    if big_m <= 0:
        raise ValueError("big_m must be positive")
    x = as_vector(x, "x")
    n = red.n_indep
    m = red.a_red.shape[0]
    a = np.hstack([red.a_red, -np.ones((m, 1))])
    b = -(red.b_mat_red @ x + red.b_vec_red)
    cost = np.zeros(n + 1)
    cost[n] = big_m
    result = solve_lp(free_lp(cost, a, b))
    if result.status == "unbounded":
        raise UnboundedError(
            "artificial problem is unbounded; the polytope has no finite max-margin point"
        )
    if result.status != "optimal":
        raise NumericalError(f"artificial LP ended with status '{result.status}'")
    u_a = float(result.solution[n])
    if u_a >= INTERIOR_TOL:
        raise EmptyInteriorError(
            f"no strict interior: artificial slack optimum {u_a:.3e} is not negative"
        )
    point = result.solution[:n]
    return InteriorResult(point=point, margin=verify_interior(red, x, point), method="artificial_lp")


@dataclass(frozen=True)
class BfsIndexSets:
    """Enumerated slack-column bases of the equational form, with factorizations.

    The slack form is a_red u + B x + b + z = 0, z >= 0.  Eliminating u via
    n independent rows (selection matrix E, W = a_indep^{-1} E) leaves

        ahat z + bhat_mat x + bhat = 0,   ahat = I - a_red W

    whose rank is m - n; ``index_sets`` lists every size-(m-n) subset of
    linearly independent ahat columns.  None of this depends on x, so the
    enumeration runs once per problem.
    """

    index_sets: tuple[tuple[int, ...], ...]
    factors: tuple
    active_rows: np.ndarray
    w: np.ndarray
    bhat_mat: np.ndarray
    bhat: np.ndarray
    red: ReducedProblem


def build_bfs_structures(red: ReducedProblem, max_subsets=20000) -> BfsIndexSets:
    a = red.a_red
    m, n = a.shape
    if m < n:
        raise RankDeficientError(
            f"need at least {n} inequality rows to form the equational basis, have {m}"
        )
    try:
        rows = sorted(greedy_independent_columns(a.T, count=n))
    except RankDeficientError as exc:
        raise RankDeficientError(f"a_red lacks {n} linearly independent rows: {exc}") from exc

    a_indep = a[rows]
    fact = scipy.linalg.lu_factor(a_indep)
    w = np.zeros((n, m))
    w[:, rows] = scipy.linalg.lu_solve(fact, np.eye(n))
    ahat = np.eye(m) - a @ w
    bhat_mat = ahat @ red.b_mat_red
    bhat = ahat @ red.b_vec_red

    n_hat = m - n
    total = math.comb(m, n_hat)
    if total > max_subsets:
        raise EnumerationCapError(
            f"{total} candidate column subsets exceed the cap {max_subsets}; "
            "use the artificial-LP or two-phase finder instead"
        )

    # Rows outside the selected independent set carry all of ahat's rank;
    # the selected rows of ahat are identically zero.
    active_rows = np.array([i for i in range(m) if i not in set(rows)], dtype=int)
    index_sets = []
    factors = []
    if n_hat == 0:
        index_sets.append(())
        factors.append(None)
    else:
        for subset in combinations(range(m), n_hat):
            sub = ahat[np.ix_(active_rows, subset)]
            # Singular subsets are expected and filtered; silence the factorization warning.
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
                lu, piv = scipy.linalg.lu_factor(sub, check_finite=False)
            if np.min(np.abs(np.diag(lu))) <= PIVOT_TOL:
                continue
            index_sets.append(subset)
            factors.append((lu, piv))
    if not index_sets:
        raise RankDeficientError("no linearly independent column subset found in ahat")

    return BfsIndexSets(
        index_sets=tuple(index_sets),
        factors=tuple(factors),
        active_rows=freeze(active_rows),
        w=freeze(w),
        bhat_mat=freeze(bhat_mat),
        bhat=freeze(bhat),
        red=red,
    )


def find_interior_bfs_average(structures: BfsIndexSets, x) -> InteriorResult:
    """Average of all basic feasible points of the slack form.

    For each cached basis: the dependent slack block is fixed to zero, the
    independent block solved from the active rows, and the point accepted
    when the whole slack vector is (tolerantly) nonnegative.
    """
    x = as_vector(x, "x")
    red = structures.red
    m = red.a_red.shape[0]
    q = red.b_mat_red @ x + red.b_vec_red
    rhs_full = -(structures.bhat_mat @ x + structures.bhat)
    rhs = rhs_full[structures.active_rows]

    def basic_point(i):
        subset = structures.index_sets[i]
        if structures.factors[i] is None:
            z_ind = np.zeros(0)
        else:
            z_ind = scipy.linalg.lu_solve(structures.factors[i], rhs, check_finite=False)
        if z_ind.size and float(np.min(z_ind)) < -BFS_ACCEPT_TOL:
            return None
        z = np.zeros(m)
        if z_ind.size:
            z[list(subset)] = z_ind
        return -structures.w @ (q + z)

    workers = worker_count(len(structures.index_sets))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(basic_point, range(len(structures.index_sets))))
    else:
        points = [basic_point(i) for i in range(len(structures.index_sets))]

    accepted = [p for p in points if p is not None]
    if not accepted:
        raise InfeasibleError("no basic feasible point: the polytope is empty")
    mean = np.mean(np.stack(accepted), axis=0)
    margin = verify_interior(red, x, mean)
    if margin >= -BFS_ACCEPT_TOL:
        raise EmptyInteriorError(
            f"basic-point average sits on the boundary (margin {margin:.3e}); "
            "the feasible set has no strict interior"
        )
    return InteriorResult(point=mean, margin=margin, method="bfs_average")


# ---------------------------------------------------------------------------
# Artificial problem posed as a full pipeline instance (two-phase finder).
# ---------------------------------------------------------------------------

def artificial_lincon(red: ReducedProblem, big_m=1.0, u_a_cap=DEFAULT_UA_CAP) -> LinConProblem:
    """The slack LP over [u; u_a] as a linearly constrained problem.

    The raw slack problem is unbounded in +u_a, but the gauge map needs a
    compact target, so a cap row u_a <= u_a_cap is added; the cap only has
    to exceed the closed-form anchor ||B x + b||_2.
    """
    n = red.n_indep
    m = red.a_red.shape[0]
    a_rows = np.hstack([red.a_red, -np.ones((m, 1))])
    cap_row = np.zeros((1, n + 1))
    cap_row[0, n] = 1.0
    a_ineq = np.vstack([a_rows, cap_row])
    b_mat = np.vstack([red.b_mat_red, np.zeros((1, red.b_mat_red.shape[1]))])
    b_vec = np.concatenate([red.b_vec_red, [-float(u_a_cap)]])

    grad = np.zeros(n + 1)
    grad[n] = float(big_m)
    frozen_grad = freeze(grad)
    objective = ObjectiveHandle(
        value=lambda u, x: float(frozen_grad @ u),
        gradient_u=lambda u, x: frozen_grad.copy(),
        spec=None,
    )
    return LinConProblem(
        a_eq=np.zeros((0, n + 1)),
        b_mat_eq=np.zeros((0, red.b_mat_red.shape[1])),
        b_vec_eq=np.zeros(0),
        a_ineq=a_ineq,
        b_mat_ineq=b_mat,
        b_vec_ineq=b_vec,
        objective=objective,
    )


def artificial_reduced(red: ReducedProblem, big_m=1.0, u_a_cap=DEFAULT_UA_CAP) -> ReducedProblem:
    """Reduced (trivially, it has no equalities) form of the artificial problem."""
    return reduce_problem(artificial_lincon(red, big_m=big_m, u_a_cap=u_a_cap))


def artificial_anchor(red: ReducedProblem, x, anchor_u=None) -> np.ndarray:
    """Closed-form interior point [u; ||a_red u + B x + b||_2] of the slack LP."""
    x = as_vector(x, "x")
    if anchor_u is None:
        anchor_u = np.zeros(red.n_indep)
    else:
        anchor_u = as_vector(anchor_u, "anchor_u")
    residual = red.ineq_residual(anchor_u, x)
    return np.concatenate([anchor_u, [float(np.linalg.norm(residual))]])


def find_interior_two_phase(red: ReducedProblem, x, phase1_model,
                            u_a_cap=DEFAULT_UA_CAP) -> InteriorResult:
    """Read an interior point off a learned solution of the artificial problem.

    The pipeline output always satisfies the artificial constraints, so a
    predicted slack u_a < 0 certifies the u-block as strictly interior;
    otherwise the prediction missed and the caller should fall back to the
    artificial LP.
    """
    from .neural import pipeline_forward

    x = as_vector(x, "x")
    art = artificial_reduced(red, u_a_cap=u_a_cap)
    anchor = artificial_anchor(red, x)
    u_art, _ = pipeline_forward(phase1_model, art, x, anchor)
    u_a_pred = float(u_art[-1])
    if u_a_pred >= 0.0:
        raise PredictionMissError(
            f"phase-one prediction gave slack {u_a_pred:.3e} >= 0; "
            "fall back to the artificial-LP finder"
        )
    point = u_art[:-1]
    return InteriorResult(point=point, margin=verify_interior(red, x, point), method="two_phase")
