import numpy as np
import pytest

from gaugeopt import (
    EmptyInteriorError,
    EnumerationCapError,
    InfeasibleError,
    MlpModel,
    PredictionMissError,
    build_bfs_structures,
    find_interior_artificial,
    find_interior_bfs_average,
    find_interior_two_phase,
    gauge_map_inverse,
    build_shifted,
    reduce_problem,
    verify_interior,
)
from gaugeopt.interior import artificial_anchor, artificial_reduced

from conftest import ineq_only_problem
from _oracles import make_bounded_polytope


def test_artificial_lp_triangle(triangle_red):
    res = find_interior_artificial(triangle_red, np.zeros(1))
    assert res.point == pytest.approx([1 / 3, 1 / 3], abs=1e-9)
    assert res.margin == pytest.approx(-1 / 3, abs=1e-9)
    assert res.method == "artificial_lp"


def test_artificial_lp_interval(interval_red):
    res = find_interior_artificial(interval_red, np.zeros(1))
    assert res.point == pytest.approx([0.0], abs=1e-9)
    assert res.margin == pytest.approx(-1.0, abs=1e-9)


def test_artificial_lp_empty_interior():
    # u <= -1 and u >= 0 cannot both hold.
    red = reduce_problem(ineq_only_problem([[1.0], [-1.0]], np.zeros((2, 1)), [1.0, 0.0]))
    with pytest.raises(EmptyInteriorError):
        find_interior_artificial(red, np.zeros(1))


def test_verify_interior_values(triangle_red):
    x = np.zeros(1)
    assert verify_interior(triangle_red, x, np.array([1 / 3, 1 / 3])) == pytest.approx(-1 / 3)
    assert verify_interior(triangle_red, x, np.array([0.0, 0.0])) == pytest.approx(0.0)
    assert verify_interior(triangle_red, x, np.array([-0.5, 0.0])) == pytest.approx(0.5)


def test_bfs_triangle_average(triangle_red):
    structures = build_bfs_structures(triangle_red)
    assert len(structures.index_sets) == 3
    res = find_interior_bfs_average(structures, np.zeros(1))
    assert res.point == pytest.approx([1 / 3, 1 / 3], abs=1e-9)
    assert res.method == "bfs_average"


def test_bfs_box_average_and_count():
    red = reduce_problem(ineq_only_problem(
        np.vstack([np.eye(2), -np.eye(2)]), np.zeros((4, 1)), -np.ones(4)))
    structures = build_bfs_structures(red)
    # Hand enumeration: 4 corners; the two opposite-wall pairs are dependent.
    assert len(structures.index_sets) == 4
    res = find_interior_bfs_average(structures, np.zeros(1))
    assert res.point == pytest.approx([0.0, 0.0], abs=1e-12)


def test_bfs_single_constraint_single_var():
    red = reduce_problem(ineq_only_problem([[1.0]], np.zeros((1, 1)), [0.0]))
    structures = build_bfs_structures(red)
    assert len(structures.index_sets) == 1


def test_bfs_degenerate_segment_empty_interior():
    # u1 = u2 on [0, 1], written with paired inequalities: zero-width set.
    a = np.array([[1.0, -1.0], [-1.0, 1.0], [-1.0, 0.0], [1.0, 0.0]])
    b_vec = np.array([0.0, 0.0, 0.0, -1.0])
    red = reduce_problem(ineq_only_problem(a, np.zeros((4, 1)), b_vec))
    structures = build_bfs_structures(red)
    with pytest.raises(EmptyInteriorError):
        find_interior_bfs_average(structures, np.zeros(1))


def test_bfs_empty_polytope_is_infeasible():
    # u <= -1 and u >= 0, padded with a second variable box to satisfy the
    # row-rank precondition.
    a = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    b_vec = np.array([1.0, 0.0, -1.0, -1.0])
    red = reduce_problem(ineq_only_problem(a, np.zeros((4, 1)), b_vec))
    with pytest.raises(InfeasibleError):
        find_interior_bfs_average(build_bfs_structures(red), np.zeros(1))


def test_bfs_structures_independent_of_x():
    rng = np.random.default_rng(0)
    a, b_mat, b_vec, x0, _ = make_bounded_polytope(rng, 2)
    red = reduce_problem(ineq_only_problem(a, b_mat, b_vec))
    s1 = build_bfs_structures(red)
    s2 = build_bfs_structures(red)
    assert s1.index_sets == s2.index_sets
    # The same cached structures serve different inputs.
    for shift in (0.0, 0.5, -0.5):
        res = find_interior_bfs_average(s1, x0 + shift)
        assert res.margin < -1e-10


def test_bfs_enumeration_cap():
    rng = np.random.default_rng(1)
    a, b_mat, b_vec, _, _ = make_bounded_polytope(rng, 4, m_extra=6)
    red = reduce_problem(ineq_only_problem(a, b_mat, b_vec))
    with pytest.raises(EnumerationCapError):
        build_bfs_structures(red, max_subsets=10)


def test_finders_agree_on_random_polytopes():
    rng = np.random.default_rng(2)
    for _ in range(25):
        n = int(rng.integers(1, 5))
        a, b_mat, b_vec, x0, _ = make_bounded_polytope(rng, n, m_extra=2)
        red = reduce_problem(ineq_only_problem(a, b_mat, b_vec))
        lp = find_interior_artificial(red, x0)
        bfs = find_interior_bfs_average(build_bfs_structures(red), x0)
        assert lp.margin < -1e-10
        assert bfs.margin < -1e-10


def test_two_phase_stub_delegating_to_lp(triangle_red):
    """Weights engineered from the LP answer stand in for a trained model."""
    x = np.zeros(1)
    lp = find_interior_artificial(triangle_red, x)
    target = np.concatenate([lp.point, [0.9 * lp.margin]])  # strictly inside

    art = artificial_reduced(triangle_red)
    anchor = artificial_anchor(triangle_red, x)
    poly = build_shifted(art, x, anchor)
    v_star = gauge_map_inverse(poly, target)

    stub = MlpModel.initialize(1 + art.n_indep, art.n_indep, hidden=(4,), seed=0)
    for w in stub.weights:
        w *= 0.0
    stub.biases[-1][:] = np.arctanh(v_star)

    res = find_interior_two_phase(triangle_red, x, stub)
    assert res.method == "two_phase"
    assert res.margin < 0
    assert res.point == pytest.approx(lp.point, abs=1e-6)


def test_two_phase_untrained_model_misses(triangle_red):
    art = artificial_reduced(triangle_red)
    zero = MlpModel.initialize(1 + art.n_indep, art.n_indep, seed=0)
    for w in zero.weights:
        w *= 0.0
    # Zero output maps to the anchor, whose slack coordinate is positive.
    with pytest.raises(PredictionMissError):
        find_interior_two_phase(triangle_red, np.zeros(1), zero)


def test_two_phase_after_training_box():
    import gaugeopt as g

    rng = np.random.default_rng(5)
    n = 2
    problem = ineq_only_problem(
        np.vstack([np.eye(n), -np.eye(n)]),
        0.05 * rng.normal(size=(2 * n, 2)),
        -np.ones(2 * n),
    )
    red = reduce_problem(problem)
    art = artificial_reduced(red)
    xs = rng.normal(size=(30, 2))
    model = MlpModel.initialize(2 + art.n_indep, art.n_indep, seed=2)
    cfg = g.TrainConfig(mode="objective_only", epochs=200, batch_size=10,
                        learning_rate=1e-2, seed=0)
    g.train(model, art, xs[:20], cfg, interior_fn=lambda x: artificial_anchor(red, x))
    for x in xs[20:]:
        res = find_interior_two_phase(red, x, model)
        assert res.margin < 0
