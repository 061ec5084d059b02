import numpy as np
import pytest

from gaugeopt import LinConProblem, builtin_objective, quadratic_objective, reduce_problem


def make_problem(a_eq, b_mat_eq, b_vec_eq, a_ineq, b_mat_ineq, b_vec_ineq, objective=None):
    return LinConProblem(
        a_eq=np.asarray(a_eq, dtype=float),
        b_mat_eq=np.asarray(b_mat_eq, dtype=float),
        b_vec_eq=np.asarray(b_vec_eq, dtype=float),
        a_ineq=np.asarray(a_ineq, dtype=float),
        b_mat_ineq=np.asarray(b_mat_ineq, dtype=float),
        b_vec_ineq=np.asarray(b_vec_ineq, dtype=float),
        objective=objective or builtin_objective("sum_squares"),
    )


def ineq_only_problem(a, b_mat, b_vec, objective=None):
    a = np.asarray(a, dtype=float)
    b_mat = np.asarray(b_mat, dtype=float)
    return make_problem(
        np.zeros((0, a.shape[1])), np.zeros((0, b_mat.shape[1])), np.zeros(0),
        a, b_mat, b_vec, objective=objective,
    )


@pytest.fixture
def triangle_red():
    """u1 >= 0, u2 >= 0, u1 + u2 <= 1; one inert input coordinate."""
    problem = ineq_only_problem(
        [[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]],
        np.zeros((3, 1)),
        [0.0, 0.0, -1.0],
    )
    return reduce_problem(problem)


@pytest.fixture
def interval_red():
    """u in [-1, 1] with one inert input coordinate."""
    problem = ineq_only_problem(
        [[1.0], [-1.0]], np.zeros((2, 1)), [-1.0, -1.0],
    )
    return reduce_problem(problem)


@pytest.fixture
def balance_red():
    """Two units in boxes [0,1] x [0,2] tied by u1 + u2 = x (tiny dispatch).

    Elimination picks u1 as dependent, leaving w = u2 feasible on
    [max(0, x-1), min(2, x)].
    """
    problem = make_problem(
        [[1.0, 1.0]], [[-1.0]], [0.0],
        np.vstack([np.eye(2), -np.eye(2)]),
        np.zeros((4, 1)),
        [-1.0, -2.0, 0.0, 0.0],
        objective=quadratic_objective(np.eye(2), np.zeros(2)),
    )
    return reduce_problem(problem)
