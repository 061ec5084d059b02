"""Built-in invariant suites behind the ``selftest`` CLI subcommand.

Each suite re-checks one of the package's load-bearing guarantees on fresh
random instances: hard feasibility of the pipeline, gauge bijectivity,
Jacobian correctness, interior-finder agreement, and solver-vs-enumeration
agreement.  The enumeration oracles here deliberately use different
algorithms than the production solvers.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .baselines import QpProblem, solve_qp
from .dcopf import generate_system, sample_dataset, to_lincon
from .gauge import build_shifted, gauge_map, gauge_map_inverse, gauge_map_jacobian
from .interior import build_bfs_structures, find_interior_artificial, find_interior_bfs_average
from .neural import MlpModel, pipeline_forward
from .problems import LinConProblem, builtin_objective, feasibility_gap
from .reduction import reduce_problem
from .simplex import StandardFormLP, solve_lp


def random_reduced_polytope(rng, n, m_extra=3, n_inp=1, box=1.0):
    """Bounded polytope with a known strict interior point at input x0.

    Returns (reduced_problem, x0, interior_point); the set mixes a box with
    random extra rows and shifts mildly with x.
    """
    rows = [np.eye(n), -np.eye(n)]
    if m_extra:
        extra = rng.normal(size=(m_extra, n))
        norms = np.linalg.norm(extra, axis=1, keepdims=True)
        rows.append(extra / np.maximum(norms, 1e-9))
    a = np.vstack(rows)
    m = a.shape[0]
    z0 = rng.uniform(-0.3, 0.3, n) * box
    x0 = rng.normal(size=n_inp)
    b_mat = 0.05 * rng.normal(size=(m, n_inp))
    margins = rng.uniform(0.2, 1.0, m) * box
    b_vec = -(a @ z0 + b_mat @ x0 + margins)
    problem = LinConProblem(
        a_eq=np.zeros((0, n)),
        b_mat_eq=np.zeros((0, n_inp)),
        b_vec_eq=np.zeros(0),
        a_ineq=a,
        b_mat_ineq=b_mat,
        b_vec_ineq=b_vec,
        objective=builtin_objective("sum_squares"),
    )
    return reduce_problem(problem), x0, z0


def lp_vertex_enumerate(cost, a, b):
    """Brute-force LP oracle: best feasible intersection of n active rows."""
    m, n = a.shape
    best = None
    for subset in combinations(range(m), n):
        sub = a[list(subset)]
        if abs(np.linalg.det(sub)) < 1e-10:
            continue
        x = np.linalg.solve(sub, b[list(subset)])
        if np.max(a @ x - b) <= 1e-8:
            val = float(cost @ x)
            if best is None or val < best:
                best = val
    return best


def qp_kkt_enumerate(q, c, g, h):
    """Brute-force convex-QP oracle: enumerate candidate active sets."""
    n = c.size
    m = g.shape[0]
    best = None
    best_u = None
    for size in range(0, n + 1):
        for subset in combinations(range(m), size):
            k = len(subset)
            kkt = np.zeros((n + k, n + k))
            kkt[:n, :n] = q
            if k:
                gs = g[list(subset)]
                kkt[:n, n:] = gs.T
                kkt[n:, :n] = gs
            rhs = np.concatenate([-c, h[list(subset)]])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                continue
            u, lam = sol[:n], sol[n:]
            if np.max(g @ u - h) > 1e-8 or (k and np.min(lam) < -1e-8):
                continue
            val = 0.5 * float(u @ q @ u) + float(c @ u)
            if best is None or val < best:
                best, best_u = val, u
    return best, best_u


def _suite_hard_feasibility():
    rng = np.random.default_rng(11)
    for sys_seed in (1, 2):
        system = generate_system(3, 3, 2, seed=sys_seed)
        problem = to_lincon(system)
        red = reduce_problem(problem)
        dataset = sample_dataset(system, 5, seed=sys_seed)
        for x in dataset.samples:
            u_o = find_interior_artificial(red, x).point
            for _ in range(40):
                model = MlpModel.initialize(
                    red.parent.n_inp + red.n_indep, red.n_indep,
                    seed=int(rng.integers(1 << 31)),
                )
                scale = 10.0 ** rng.uniform(-1, 2)
                for w in model.weights:
                    w *= scale
                u_full, _ = pipeline_forward(model, red, x, u_o)
                gap = feasibility_gap(problem, [(u_full, x)])
                if gap > 1e-9:
                    raise AssertionError(f"feasibility gap {gap:.3e} exceeds 1e-9")


def _suite_gauge_roundtrip():
    rng = np.random.default_rng(12)
    for _ in range(100):
        n = int(rng.integers(1, 5))
        red, x0, z0 = random_reduced_polytope(rng, n)
        poly = build_shifted(red, x0, z0)
        for _ in range(5):
            v = rng.uniform(-1, 1, n)
            back = gauge_map_inverse(poly, gauge_map(poly, v))
            if np.max(np.abs(back - v)) > 1e-9:
                raise AssertionError("gauge round-trip deviation above 1e-9")


def _suite_gauge_jacobian():
    rng = np.random.default_rng(13)
    checked = 0
    while checked < 20:
        n = int(rng.integers(2, 5))
        red, x0, z0 = random_reduced_polytope(rng, n)
        poly = build_shifted(red, x0, z0)
        v = rng.uniform(-0.95, 0.95, n)
        if _is_tied(poly, v):
            continue
        jac = gauge_map_jacobian(poly, v)
        fd = _fd_jacobian(lambda w: gauge_map(poly, w), v)
        rel = np.max(np.abs(jac - fd)) / max(np.max(np.abs(fd)), 1e-12)
        if rel > 1e-5:
            raise AssertionError(f"gauge Jacobian FD mismatch {rel:.3e}")
        checked += 1


def _is_tied(poly, v, tol=1e-6):
    a = np.abs(v)
    top = np.sort(a)[-2:] if a.size > 1 else None
    if top is not None and abs(top[1] - top[0]) < tol * max(top[1], 1e-12):
        return True
    ratios = (poly.f_rows @ v) / poly.g_offsets
    top_r = np.sort(ratios)[-2:]
    return abs(top_r[1] - top_r[0]) < tol * max(abs(top_r[1]), 1e-12)


def _fd_jacobian(fn, v, h=1e-7):
    n = v.size
    cols = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        cols.append((fn(v + e) - fn(v - e)) / (2 * h))
    return np.stack(cols, axis=1)


def _suite_interior_agreement():
    rng = np.random.default_rng(14)
    for _ in range(20):
        n = int(rng.integers(1, 4))
        red, x0, _ = random_reduced_polytope(rng, n, m_extra=2)
        lp = find_interior_artificial(red, x0)
        bfs = find_interior_bfs_average(build_bfs_structures(red), x0)
        if lp.margin >= -1e-10 or bfs.margin >= -1e-10:
            raise AssertionError("finder returned a non-interior point")


def _suite_lp_oracle():
    rng = np.random.default_rng(15)
    for _ in range(20):
        n = int(rng.integers(1, 4))
        m = int(rng.integers(1, 6))
        a = np.vstack([rng.normal(size=(m, n)), np.eye(n), -np.eye(n)])
        b = np.concatenate([rng.uniform(0.5, 2.0, m), np.full(2 * n, 2.0)])
        cost = rng.normal(size=n)
        res = solve_lp(StandardFormLP(cost=cost, a=a, b=b,
                                      bounds=tuple((-np.inf, np.inf) for _ in range(n))))
        oracle = lp_vertex_enumerate(cost, a, b)
        if res.status != "optimal" or oracle is None:
            raise AssertionError(f"unexpected LP status {res.status}")
        if abs(res.objective - oracle) > 1e-7:
            raise AssertionError(f"LP objective {res.objective} != oracle {oracle}")


def _suite_qp_oracle():
    rng = np.random.default_rng(16)
    for _ in range(10):
        n = int(rng.integers(1, 3))
        base = rng.normal(size=(n, n))
        q = base @ base.T + np.eye(n)
        c = rng.normal(size=n)
        g = np.vstack([rng.normal(size=(2, n)), np.eye(n), -np.eye(n)])
        h = np.concatenate([rng.uniform(0.5, 1.5, 2), np.full(2 * n, 1.5)])
        u = solve_qp(QpProblem(q=q, c=c, g=g, h=h))
        ref_val, _ = qp_kkt_enumerate(q, c, g, h)
        val = 0.5 * float(u @ q @ u) + float(c @ u)
        if abs(val - ref_val) > 1e-5:
            raise AssertionError(f"QP value {val} != oracle {ref_val}")


SUITES = (
    ("hard_feasibility", _suite_hard_feasibility),
    ("gauge_roundtrip", _suite_gauge_roundtrip),
    ("gauge_jacobian_fd", _suite_gauge_jacobian),
    ("interior_agreement", _suite_interior_agreement),
    ("lp_vs_enumeration", _suite_lp_oracle),
    ("qp_vs_enumeration", _suite_qp_oracle),
)


def run_selftest(out=print) -> int:
    failures = 0
    for name, suite in SUITES:
        try:
            suite()
        except Exception as exc:  # noqa: BLE001 - report and continue
            failures += 1
            out(f"FAIL {name}: {exc}")
        else:
            out(f"ok   {name}")
    return 0 if failures == 0 else 1
