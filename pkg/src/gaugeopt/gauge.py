"""Minkowski gauge of a polytope and the ball-to-polytope gauge map.

For a compact convex set C containing the origin in its interior, the gauge
is phi_C(c) = inf { r > 0 : c in r*C }.  For a polytope in row form
{ w : F w <= g } with g > 0 it reduces to max_j F_j w / g_j, and for the
l-infinity unit ball it is the max-norm.

The gauge map sends the l-infinity unit ball onto the shifted feasible set:

    T(v) = ( phi_ball(v) / phi_poly(v) ) * v + u_o

It is a bijection that carries boundary to boundary, so every output is
feasible by construction no matter what produced v.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotInteriorError, UnboundedError
from .linalg import as_vector, freeze
from .reduction import ReducedProblem

#: Offsets at or below this are treated as a boundary/exterior shift point.
MIN_OFFSET = 1e-12

#: Inputs with max-norm below this collapse to the shift point u_o.
ZERO_DIRECTION = 1e-12

#: Slack allowed on ||v||_inf <= 1 before rejecting the input.
BALL_TOL = 1e-9


class LinfUnitBall:
    """Marker for the l-infinity unit ball as a gauge argument."""

    def __repr__(self):
        return "UNIT_BALL"


UNIT_BALL = LinfUnitBall()


@dataclass(frozen=True)
class ShiftedPolytope:
    """Origin-interior row form { w : f_rows w <= g_offsets } after shifting by u_o."""

    f_rows: np.ndarray
    g_offsets: np.ndarray
    u_o: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "f_rows", freeze(np.asarray(self.f_rows, dtype=float).copy()))
        object.__setattr__(self, "g_offsets", freeze(np.asarray(self.g_offsets, dtype=float).copy()))
        object.__setattr__(self, "u_o", freeze(np.asarray(self.u_o, dtype=float).copy()))

    @property
    def dim(self) -> int:
        return self.f_rows.shape[1]


@dataclass(frozen=True)
class GaugeEvaluation:
    value: float
    active_row: int


def build_shifted(red: ReducedProblem, x, u_o) -> ShiftedPolytope:
    """Shift the reduced feasible set by an interior point u_o.

    The shifted set is { w : a_red w <= g } with
    g = -(a_red u_o + b_mat_red x + b_vec_red); u_o must be strictly
    interior so that every offset is positive.
    """
    x = as_vector(x, "x")
    u_o = as_vector(u_o, "u_o")
    if red.a_red.shape[0] == 0:
        raise ValueError("reduced problem has no inequality rows; gauge map undefined")
    offsets = -(red.a_red @ u_o + red.b_mat_red @ x + red.b_vec_red)
    worst = int(np.argmin(offsets))
    if offsets[worst] <= MIN_OFFSET:
        raise NotInteriorError(
            f"u_o is not strictly interior: row {worst} has offset {offsets[worst]:.3e} "
            f"(must exceed {MIN_OFFSET:g})"
        )
    return ShiftedPolytope(f_rows=red.a_red, g_offsets=offsets, u_o=u_o)


def minkowski_gauge(poly, c) -> GaugeEvaluation:
    """Gauge of c for a ShiftedPolytope or for UNIT_BALL.

    Polytope values are clamped below at zero to absorb float-noise
    negatives; the active row is the argmax with lowest index on ties.
    """
    c = as_vector(c, "c")
    if isinstance(poly, LinfUnitBall):
        if c.size == 0:
            return GaugeEvaluation(value=0.0, active_row=0)
        k = int(np.argmax(np.abs(c)))
        return GaugeEvaluation(value=float(np.abs(c[k])), active_row=k)
    ratios = (poly.f_rows @ c) / poly.g_offsets
    j = int(np.argmax(ratios))
    return GaugeEvaluation(value=max(float(ratios[j]), 0.0), active_row=j)


def gauge_map(poly: ShiftedPolytope, v) -> np.ndarray:
    """Map v from the l-infinity unit ball onto the unshifted feasible set.

    Returns u_o exactly when v is within ZERO_DIRECTION of the origin (the
    ratio is 0/0 there; continuity forces u_o).  Inputs with
    ||v||_inf > 1 + BALL_TOL are rejected.
    """
    v = as_vector(v, "v")
    ball = minkowski_gauge(UNIT_BALL, v)
    if ball.value > 1.0 + BALL_TOL:
        raise ValueError(f"||v||_inf = {ball.value:.12g} exceeds the unit ball")
    if ball.value < ZERO_DIRECTION:
        return poly.u_o.copy()
    body = minkowski_gauge(poly, v)
    if body.value <= 1e-15:
        raise UnboundedError(
            "gauge vanished along a nonzero direction; the polytope is unbounded "
            "and the gauge map is undefined there"
        )
    # Clamp the numerator at 1 so the tolerance band cannot push the image
    # past the boundary.
    ratio = min(ball.value, 1.0) / body.value
    return ratio * v + poly.u_o


def gauge_map_inverse(poly: ShiftedPolytope, u_indep) -> np.ndarray:
    """Inverse map: feasible point back into the l-infinity unit ball."""
    u_indep = as_vector(u_indep, "u_indep")
    w = u_indep - poly.u_o
    slack = poly.f_rows @ w - poly.g_offsets
    if np.any(slack > BALL_TOL):
        worst = int(np.argmax(slack))
        raise ValueError(
            f"point is infeasible for the shifted polytope: row {worst} violated "
            f"by {slack[worst]:.3e}"
        )
    ball = minkowski_gauge(UNIT_BALL, w)
    if ball.value < ZERO_DIRECTION:
        return np.zeros(poly.dim)
    body = minkowski_gauge(poly, w)
    return (body.value / ball.value) * w


def gauge_map_jacobian(poly: ShiftedPolytope, v) -> np.ndarray:
    """Jacobian of gauge_map at v using the locally active linear pieces.

    Away from argmax ties the map is u = (phi_B(v)/phi_S(v)) v + u_o with
    phi_B(v) = s * v_k and phi_S(v) = F_j v / g_j for the active k and j, so

        J = (phi_B/phi_S) I + v (grad phi_B / phi_S - phi_B grad phi_S / phi_S^2)'

    with grad phi_B = s e_k and grad phi_S = F_j / g_j.  At v ~ 0 the map is
    not differentiable; we return alpha*I where alpha = min_j g_j/||F_j||_1,
    the largest uniform scaling of the unit ball inscribed in the polytope
    (a documented subgradient convention).
    """
    v = as_vector(v, "v")
    n = poly.dim
    ball = minkowski_gauge(UNIT_BALL, v)
    if ball.value < ZERO_DIRECTION:
        row_l1 = np.sum(np.abs(poly.f_rows), axis=1)
        alpha = float(np.min(poly.g_offsets / np.maximum(row_l1, 1e-300)))
        return alpha * np.eye(n)
    k = ball.active_row
    s = 1.0 if v[k] >= 0 else -1.0
    body = minkowski_gauge(poly, v)
    if body.value <= 1e-15:
        raise UnboundedError("gauge vanished along a nonzero direction")
    j = body.active_row
    phi_b = ball.value
    phi_s = body.value
    grad_b = np.zeros(n)
    grad_b[k] = s
    grad_s = poly.f_rows[j] / poly.g_offsets[j]
    coeff = grad_b / phi_s - (phi_b / phi_s**2) * grad_s
    return (phi_b / phi_s) * np.eye(n) + np.outer(v, coeff)
