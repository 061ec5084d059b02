"""Equality elimination: partition u, reconstruct dependents, reduce the problem.

With the equality columns split as ``a_eq = [a_dep | a_indep]`` (a_dep square
nonsingular), the dependent block is an affine function of the independent one:

    u_dep = -a_dep^{-1} a_indep u_indep - a_dep^{-1} (b_mat_eq x + b_vec_eq)

Substituting into the inequalities leaves an inequality-only problem over
u_indep with

    a_red     = ai_indep - ai_dep a_dep^{-1} a_indep
    b_mat_red = b_mat_ineq - ai_dep a_dep^{-1} b_mat_eq
    b_vec_red = b_vec_ineq - ai_dep a_dep^{-1} b_vec_eq

where ``ai_*`` are the inequality columns split the same way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalError, RankDeficientError
from .linalg import as_vector, freeze, greedy_independent_columns, PIVOT_TOL
from .problems import LinConProblem

#: Absolute tolerance on equality residuals of lifted vectors.
EQ_RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class VariablePartition:
    """Index split of u into independent/dependent blocks.

    ``dep_factorization`` is the scipy LU factorization of the square matrix
    formed by the dependent columns of a_eq (None when there are no
    equalities); the inverse itself is never formed.
    """

    indep_idx: np.ndarray
    dep_idx: np.ndarray
    dep_factorization: tuple | None

    @property
    def n_indep(self) -> int:
        return self.indep_idx.size

    @property
    def n_dep(self) -> int:
        return self.dep_idx.size


def partition_variables(problem: LinConProblem, pivot_tol=PIVOT_TOL) -> VariablePartition:
    """Pick n_eq linearly independent equality columns as the dependent block.

    Selection is a greedy column-pivoted sweep (largest residual norm wins,
    lowest index on ties), so identical inputs always give identical
    partitions.  Raises RankDeficientError when a_eq has no nonsingular
    column subset of size n_eq.
    """
    n_opt, n_eq = problem.n_opt, problem.n_eq
    if n_eq == 0:
        return VariablePartition(
            indep_idx=freeze(np.arange(n_opt)),
            dep_idx=freeze(np.arange(0)),
            dep_factorization=None,
        )
    if n_eq >= n_opt:
        raise RankDeficientError(
            f"equality block must be under-determined: n_eq {n_eq} >= n_opt {n_opt}"
        )
    chosen = greedy_independent_columns(problem.a_eq, count=n_eq, pivot_tol=pivot_tol)
    dep_idx = np.array(sorted(chosen), dtype=int)
    mask = np.ones(n_opt, dtype=bool)
    mask[dep_idx] = False
    indep_idx = np.nonzero(mask)[0]
    a_dep = problem.a_eq[:, dep_idx]
    factorization = scipy.linalg.lu_factor(a_dep)
    return VariablePartition(
        indep_idx=freeze(indep_idx),
        dep_idx=freeze(dep_idx),
        dep_factorization=factorization,
    )


@dataclass(frozen=True)
class ReducedProblem:
    """Inequality-only problem over u_indep plus the data to undo the split."""

    a_red: np.ndarray
    b_mat_red: np.ndarray
    b_vec_red: np.ndarray
    partition: VariablePartition
    parent: LinConProblem

    @property
    def n_indep(self) -> int:
        return self.partition.n_indep

    def ineq_residual(self, u_indep, x) -> np.ndarray:
        return self.a_red @ u_indep + self.b_mat_red @ x + self.b_vec_red


def _dep_solve(partition: VariablePartition, rhs: np.ndarray, trans=0) -> np.ndarray:
    return scipy.linalg.lu_solve(partition.dep_factorization, rhs, trans=trans)


def reduce_problem(problem: LinConProblem) -> ReducedProblem:
    """Build the reduced inequality-only problem via the closed forms above.

    The elimination products are verified against an independent dense solve
    on construction; disagreement raises NumericalError.
    """
    part = partition_variables(problem)
    if part.n_dep == 0:
        return ReducedProblem(
            a_red=freeze(problem.a_ineq.copy()),
            b_mat_red=freeze(problem.b_mat_ineq.copy()),
            b_vec_red=freeze(problem.b_vec_ineq.copy()),
            partition=part,
            parent=problem,
        )

    a_eq_dep = problem.a_eq[:, part.dep_idx]
    a_eq_indep = problem.a_eq[:, part.indep_idx]
    ai_dep = problem.a_ineq[:, part.dep_idx]
    ai_indep = problem.a_ineq[:, part.indep_idx]

    # a_dep^{-1} applied to the three equality right-hand-side blocks.
    z_indep = _dep_solve(part, a_eq_indep)
    z_bmat = _dep_solve(part, problem.b_mat_eq)
    z_bvec = _dep_solve(part, problem.b_vec_eq)

    a_red = ai_indep - ai_dep @ z_indep
    b_mat_red = problem.b_mat_ineq - ai_dep @ z_bmat
    b_vec_red = problem.b_vec_ineq - ai_dep @ z_bvec

    # Cross-check the factorized solve against a direct dense solve.
    direct = np.linalg.solve(a_eq_dep, a_eq_indep)
    if not np.allclose(z_indep, direct, rtol=1e-9, atol=1e-9):
        raise NumericalError("LU-based elimination disagrees with direct dense solve")

    return ReducedProblem(
        a_red=freeze(a_red),
        b_mat_red=freeze(b_mat_red),
        b_vec_red=freeze(b_vec_red),
        partition=part,
        parent=problem,
    )


def reconstruct_dependent(red: ReducedProblem, u_indep, x) -> np.ndarray:
    """Dependent block implied by the equalities at (u_indep, x)."""
    u_indep = as_vector(u_indep, "u_indep")
    x = as_vector(x, "x")
    part = red.partition
    if part.n_dep == 0:
        return np.zeros(0)
    problem = red.parent
    rhs = problem.a_eq[:, part.indep_idx] @ u_indep + problem.b_mat_eq @ x + problem.b_vec_eq
    return -_dep_solve(part, rhs)


def lift_solution(red: ReducedProblem, u_indep, x) -> np.ndarray:
    """Full-dimension vector with blocks placed back at their original indices."""
    u_indep = as_vector(u_indep, "u_indep")
    part = red.partition
    full = np.empty(red.parent.n_opt)
    full[part.indep_idx] = u_indep
    if part.n_dep:
        full[part.dep_idx] = reconstruct_dependent(red, u_indep, x)
    return full


def grad_full_to_indep(red: ReducedProblem, grad_full) -> np.ndarray:
    """Chain a gradient w.r.t. the full vector through the reconstruction.

    d u_dep / d u_indep = -a_dep^{-1} a_indep, so the reduced gradient is
    g_indep - a_indep' a_dep^{-T} g_dep.
    """
    grad_full = as_vector(grad_full, "grad_full")
    part = red.partition
    g_indep = grad_full[part.indep_idx]
    if part.n_dep == 0:
        return g_indep
    g_dep = grad_full[part.dep_idx]
    w = _dep_solve(part, g_dep, trans=1)
    return g_indep - red.parent.a_eq[:, part.indep_idx].T @ w


def lift_matrix(red: ReducedProblem) -> np.ndarray:
    """Dense linear part L of the affine lift u = L u_indep + offset(x)."""
    part = red.partition
    n_opt = red.parent.n_opt
    lift = np.zeros((n_opt, part.n_indep))
    lift[part.indep_idx, np.arange(part.n_indep)] = 1.0
    if part.n_dep:
        a_eq_indep = red.parent.a_eq[:, part.indep_idx]
        lift[part.dep_idx] = -_dep_solve(part, a_eq_indep)
    return lift


def reduced_objective(red: ReducedProblem, u_indep, x) -> tuple[float, np.ndarray]:
    """Parent objective and gradient evaluated through the lift."""
    x = as_vector(x, "x")
    full = lift_solution(red, u_indep, x)
    value = float(red.parent.objective.value(full, x))
    grad_full = as_vector(red.parent.objective.gradient_u(full, x), "gradient")
    return value, grad_full_to_indep(red, grad_full)
