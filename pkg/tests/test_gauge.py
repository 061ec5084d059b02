import numpy as np
import pytest

from gaugeopt import (
    NotInteriorError,
    UNIT_BALL,
    build_shifted,
    gauge_map,
    gauge_map_inverse,
    gauge_map_jacobian,
    minkowski_gauge,
    reduce_problem,
)

from conftest import ineq_only_problem
from _oracles import fd_jacobian, make_bounded_polytope


def box_red(half_widths, n_inp=1):
    """Axis-aligned box |u_i| <= half_widths[i] as a reduced problem."""
    half = np.asarray(half_widths, dtype=float)
    n = half.size
    a = np.vstack([np.eye(n), -np.eye(n)])
    b_vec = -np.concatenate([half, half])
    return reduce_problem(ineq_only_problem(a, np.zeros((2 * n, n_inp)), b_vec))


def random_poly(rng, n, **kw):
    a, b_mat, b_vec, x0, z0 = make_bounded_polytope(rng, n, **kw)
    red = reduce_problem(ineq_only_problem(a, b_mat, b_vec))
    return build_shifted(red, x0, z0)


def test_build_shifted_symmetric_interval():
    red = box_red([1.0])
    poly = build_shifted(red, np.zeros(1), np.zeros(1))
    assert poly.g_offsets == pytest.approx([1.0, 1.0])


def test_build_shifted_asymmetric_interval():
    # [0, 2] shifted by 0.5: offsets (1.5 above, 0.5 below).
    red = reduce_problem(ineq_only_problem([[1.0], [-1.0]], np.zeros((2, 1)), [-2.0, 0.0]))
    poly = build_shifted(red, np.zeros(1), np.array([0.5]))
    assert poly.g_offsets == pytest.approx([1.5, 0.5])


def test_build_shifted_boundary_point_rejected():
    red = box_red([1.0])
    with pytest.raises(NotInteriorError) as exc:
        build_shifted(red, np.zeros(1), np.array([1.0]))
    assert "row 0" in str(exc.value)


def test_minkowski_gauge_unit_ball():
    ev = minkowski_gauge(UNIT_BALL, np.array([0.5, -0.25]))
    assert ev.value == pytest.approx(0.5)
    assert ev.active_row == 0


def test_minkowski_gauge_triangle_hand_value(triangle_red):
    poly = build_shifted(triangle_red, np.zeros(1), np.array([1 / 3, 1 / 3]))
    assert poly.g_offsets == pytest.approx([1 / 3, 1 / 3, 1 / 3])
    ev = minkowski_gauge(poly, np.array([1 / 6, 1 / 6]))
    assert ev.value == pytest.approx(1.0)
    assert ev.active_row == 2


def test_minkowski_gauge_origin_is_zero():
    rng = np.random.default_rng(0)
    poly = random_poly(rng, 3)
    assert minkowski_gauge(poly, np.zeros(3)).value == 0.0
    assert minkowski_gauge(UNIT_BALL, np.zeros(3)).value == 0.0


def test_gauge_map_center_to_center():
    rng = np.random.default_rng(1)
    poly = random_poly(rng, 3)
    assert np.array_equal(gauge_map(poly, np.zeros(3)), poly.u_o)


def test_gauge_map_scaled_box_hand_ratio():
    red = box_red([2.0, 2.0], n_inp=1)
    u_o = np.array([0.1, -0.2])
    poly = build_shifted(red, np.zeros(1), u_o)
    # Shifted box is still within ~[-1.8, 2.2]; along +e1 the wall is at 1.9.
    out = gauge_map(poly, np.array([0.5, 0.0]))
    # phi_B = 0.5, phi_poly = 0.5/1.9, ratio = 1.9
    assert out == pytest.approx(u_o + np.array([0.95, 0.0]))

    centered = build_shifted(red, np.zeros(1), np.zeros(2))
    out = gauge_map(centered, np.array([0.5, 0.0]))
    assert out == pytest.approx([1.0, 0.0])


def test_gauge_map_boundary_to_boundary():
    rng = np.random.default_rng(2)
    for _ in range(20):
        poly = random_poly(rng, 3)
        v = rng.uniform(-1, 1, 3)
        v[int(rng.integers(3))] = 1.0 if rng.random() < 0.5 else -1.0
        out = gauge_map(poly, v)
        slack = poly.f_rows @ (out - poly.u_o) - poly.g_offsets
        assert np.max(slack) == pytest.approx(0.0, abs=1e-9)


def test_gauge_map_rejects_points_outside_ball():
    rng = np.random.default_rng(3)
    poly = random_poly(rng, 2)
    with pytest.raises(ValueError):
        gauge_map(poly, np.array([1.1, 0.0]))


def test_gauge_map_feasibility_sweep():
    rng = np.random.default_rng(4)
    for _ in range(50):
        n = int(rng.integers(1, 5))
        a, b_mat, b_vec, x0, z0 = make_bounded_polytope(rng, n)
        red = reduce_problem(ineq_only_problem(a, b_mat, b_vec))
        poly = build_shifted(red, x0, z0)
        for _ in range(20):
            v = rng.uniform(-1, 1, n)
            out = gauge_map(poly, v)
            assert np.max(red.ineq_residual(out, x0)) <= 1e-9


def test_gauge_map_inverse_center():
    rng = np.random.default_rng(5)
    poly = random_poly(rng, 2)
    assert np.array_equal(gauge_map_inverse(poly, poly.u_o), np.zeros(2))


def test_gauge_roundtrip_100_points():
    rng = np.random.default_rng(6)
    poly = random_poly(rng, 3)
    worst = 0.0
    for _ in range(100):
        v = rng.uniform(-1, 1, 3)
        back = gauge_map_inverse(poly, gauge_map(poly, v))
        worst = max(worst, float(np.max(np.abs(back - v))))
    assert worst < 1e-9


def test_gauge_inverse_boundary_point_has_unit_norm():
    rng = np.random.default_rng(7)
    poly = random_poly(rng, 2)
    v = np.array([1.0, rng.uniform(-0.9, 0.9)])
    boundary = gauge_map(poly, v)
    back = gauge_map_inverse(poly, boundary)
    assert np.max(np.abs(back)) == pytest.approx(1.0, abs=1e-9)


def test_gauge_inverse_rejects_infeasible():
    red = box_red([1.0, 1.0])
    poly = build_shifted(red, np.zeros(1), np.zeros(2))
    with pytest.raises(ValueError):
        gauge_map_inverse(poly, np.array([2.0, 0.0]))


def test_gauge_positive_homogeneity():
    rng = np.random.default_rng(8)
    for _ in range(20):
        poly = random_poly(rng, 3)
        v = rng.uniform(-0.9, 0.9, 3)
        base = gauge_map(poly, v) - poly.u_o
        for alpha in (0.25, 0.5, 0.75, 1.0):
            scaled = gauge_map(poly, alpha * v) - poly.u_o
            assert np.allclose(scaled, alpha * base, atol=1e-12)


def test_jacobian_identity_when_set_is_the_ball():
    red = box_red([1.0, 1.0])
    poly = build_shifted(red, np.zeros(1), np.zeros(2))
    jac = gauge_map_jacobian(poly, np.array([0.5, 0.2]))
    assert np.allclose(jac, np.eye(2), atol=1e-12)


def test_jacobian_scaled_ball_is_scaled_identity():
    red = box_red([2.0, 2.0])
    poly = build_shifted(red, np.zeros(1), np.zeros(2))
    jac = gauge_map_jacobian(poly, np.array([0.5, 0.2]))
    assert np.allclose(jac, 2.0 * np.eye(2), atol=1e-12)


def test_jacobian_zero_direction_convention():
    red = box_red([2.0, 2.0])
    poly = build_shifted(red, np.zeros(1), np.zeros(2))
    assert np.allclose(gauge_map_jacobian(poly, np.zeros(2)), 2.0 * np.eye(2))
    unit = build_shifted(box_red([1.0, 1.0]), np.zeros(1), np.zeros(2))
    assert np.allclose(gauge_map_jacobian(unit, np.zeros(2)), np.eye(2))


def _tied(poly, v, tol=1e-5):
    a = np.sort(np.abs(v))
    if a.size > 1 and a[-1] - a[-2] < tol * max(a[-1], 1e-9):
        return True
    r = np.sort((poly.f_rows @ v) / poly.g_offsets)
    return r[-1] - r[-2] < tol * max(abs(r[-1]), 1e-9)


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(9)
    checked = 0
    while checked < 40:
        n = int(rng.integers(2, 5))
        poly = random_poly(rng, n)
        v = rng.uniform(-0.95, 0.95, n)
        if _tied(poly, v):
            continue
        jac = gauge_map_jacobian(poly, v)
        fd = fd_jacobian(lambda w: gauge_map(poly, w), v)
        denom = max(float(np.max(np.abs(fd))), 1e-12)
        assert np.max(np.abs(jac - fd)) / denom < 1e-5
        checked += 1
