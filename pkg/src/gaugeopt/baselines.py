"""Comparison methods and the dense QP oracle behind them.

The QP oracle (primal active set) supplies reference optima and the
projection feasibility layer.  The learned baselines differ from the gauge
pipeline only in how (or whether) they enforce feasibility:

* penalty  -- unconstrained network, constraint violations priced into the
  loss; feasibility is NOT guaranteed at inference.
* projection -- network output projected onto the feasible set by a QP.
* dc3-style  -- network output corrected by a few gradient steps on the
  squared inequality violation, with equality completion every step;
  feasibility is NOT guaranteed either.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, NumericalError, TrainingDivergedError
from .linalg import as_matrix, as_vector, freeze
from .neural import MlpModel, TrainConfig, mlp_backprop, mlp_forward
from .reduction import (
    ReducedProblem,
    grad_full_to_indep,
    lift_matrix,
    lift_solution,
)
from .simplex import StandardFormLP, solve_lp

KKT_TOL = 1e-7
PRIMAL_TOL = 1e-9


@dataclass(frozen=True)
class QpProblem:
    """min 1/2 u'q u + c'u  s.t.  g u <= h, with q symmetric PSD."""

    q: np.ndarray
    c: np.ndarray
    g: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", freeze(as_matrix(self.q, "q").copy()))
        object.__setattr__(self, "c", freeze(as_vector(self.c, "c").copy()))
        object.__setattr__(self, "g", freeze(as_matrix(self.g, "g").copy()))
        object.__setattr__(self, "h", freeze(as_vector(self.h, "h").copy()))
        n = self.c.size
        if self.q.shape != (n, n) or self.g.shape[1] != n or self.h.size != self.g.shape[0]:
            raise ValueError("inconsistent QP dimensions")
        if not np.allclose(self.q, self.q.T, atol=1e-9):
            raise ValueError("q must be symmetric")
        floor = float(np.min(np.linalg.eigvalsh(0.5 * (self.q + self.q.T))))
        if floor < -1e-9:
            raise ValueError(f"q must be PSD; smallest eigenvalue {floor:.3e}")


def _feasible_start(g, h):
    """Any feasible point via the slack LP (the slack only needs to reach 0)."""
    m, n = g.shape
    a = np.hstack([g, -np.ones((m, 1))])
    cost = np.zeros(n + 1)
    cost[n] = 1.0
    bounds = tuple([(-np.inf, np.inf)] * n + [(-1.0, np.inf)])
    result = solve_lp(StandardFormLP(cost=cost, a=a, b=h, bounds=bounds))
    if result.status != "optimal":
        raise NumericalError(f"feasibility LP ended with status '{result.status}'")
    slack = float(result.solution[n])
    if slack > PRIMAL_TOL:
        raise InfeasibleError(f"constraint set is empty (best slack {slack:.3e})")
    return result.solution[:n]


def solve_qp(qp: QpProblem, start=None, max_iter=None) -> np.ndarray:
    """Primal active-set method for small dense convex QPs.

    Maintains a feasible iterate throughout; terminates when the KKT
    conditions hold to KKT_TOL.  ``start`` must be feasible when given.
    """
    n = qp.c.size
    m = qp.g.shape[0]
    if max_iter is None:
        max_iter = 100 + 10 * (m + n)
    if start is None:
        u = _feasible_start(qp.g, qp.h)
    else:
        u = as_vector(start, "start").copy()
        if m and float(np.max(qp.g @ u - qp.h)) > PRIMAL_TOL:
            raise ValueError("start point is infeasible")

    work: list[int] = []
    lam = np.zeros(0)
    for _ in range(max_iter):
        grad = qp.q @ u + qp.c
        k = len(work)
        kkt = np.zeros((n + k, n + k))
        kkt[:n, :n] = qp.q
        if k:
            gw = qp.g[work]
            kkt[:n, n:] = gw.T
            kkt[n:, :n] = gw
        rhs = np.concatenate([-grad, np.zeros(k)])
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular KKT system with working set {work}") from exc
        p = sol[:n]
        lam = sol[n:]

        if float(np.max(np.abs(p), initial=0.0)) <= 1e-11:
            if k == 0 or float(np.min(lam)) >= -1e-9:
                break
            work.pop(int(np.argmin(lam)))
            continue

        alpha = 1.0
        blocker = -1
        for i in range(m):
            if i in work:
                continue
            d = float(qp.g[i] @ p)
            if d > 1e-12:
                a = (qp.h[i] - float(qp.g[i] @ u)) / d
                if a < alpha - 1e-12:
                    alpha, blocker = a, i
        u = u + max(alpha, 0.0) * p
        if blocker >= 0:
            work.append(blocker)
    else:
        raise NumericalError(f"active-set QP failed to converge in {max_iter} iterations")

    residual = qp.q @ u + qp.c
    if work:
        residual = residual + qp.g[work].T @ lam
    if float(np.max(np.abs(residual))) > KKT_TOL:
        raise NumericalError(f"KKT stationarity residual {np.max(np.abs(residual)):.3e}")
    if m and float(np.max(qp.g @ u - qp.h)) > PRIMAL_TOL:
        raise NumericalError("active-set iterate lost primal feasibility")
    return u


def reduced_polytope_rows(red: ReducedProblem, x):
    """Rows (g, h) of the reduced feasible set at input x: g u <= h."""
    x = as_vector(x, "x")
    return red.a_red, -(red.b_mat_red @ x + red.b_vec_red)


def reduced_qp(red: ReducedProblem, x) -> QpProblem:
    """Reduced-space QP for a parent problem with a quadratic objective."""
    spec = red.parent.objective.spec
    if not spec or "quadratic" not in spec:
        raise ValueError("reduced_qp requires a quadratic parent objective")
    q_full = np.asarray(spec["quadratic"]["Q"], dtype=float)
    c_full = np.asarray(spec["quadratic"]["c"], dtype=float)
    lift = lift_matrix(red)
    offset = lift_solution(red, np.zeros(red.n_indep), x)
    q_red = lift.T @ q_full @ lift
    c_red = lift.T @ (q_full @ offset + c_full)
    g, h = reduced_polytope_rows(red, x)
    return QpProblem(q=0.5 * (q_red + q_red.T), c=c_red, g=g, h=h)


def reference_optimum(red: ReducedProblem, x) -> np.ndarray:
    """Full-dimension optimum of a quadratic parent via the reduced QP."""
    w = solve_qp(reduced_qp(red, x))
    return lift_solution(red, w, x)


def project_onto_polytope(red: ReducedProblem, x, y) -> np.ndarray:
    """Euclidean projection of y onto the reduced feasible set."""
    y = as_vector(y, "y")
    g, h = reduced_polytope_rows(red, x)
    qp = QpProblem(q=np.eye(y.size), c=-y, g=g, h=h)
    return solve_qp(qp)


@dataclass
class BaselineConfig:
    method: str = "penalty"
    penalty_coefficient: float = 1e4
    dc3_step_size: float = 1e-4
    dc3_inner_iters_train: int = 3
    dc3_inner_iters_test: int = 3

    def __post_init__(self):
        if self.method not in ("penalty", "projection", "dc3"):
            raise ValueError(f"unknown baseline method '{self.method}'")
        if (self.penalty_coefficient <= 0 or self.dc3_step_size <= 0
                or self.dc3_inner_iters_train <= 0 or self.dc3_inner_iters_test <= 0):
            raise ValueError("baseline hyperparameters must be positive")


def _train_raw(model: MlpModel, xs, loss_and_grad, cfg: TrainConfig):
    """Momentum-SGD loop for a bare network with a caller-supplied loss.

    ``loss_and_grad(idx, out)`` returns the per-sample loss and its gradient
    w.r.t. the network output.
    """
    xs = np.asarray(xs, dtype=float)
    n_samples = xs.shape[0]
    rng = np.random.default_rng(cfg.seed)
    vel_w = [np.zeros_like(w) for w in model.weights]
    vel_b = [np.zeros_like(b) for b in model.biases]
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n_samples)
        epoch_loss = 0.0
        for start in range(0, n_samples, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            acc_w = [np.zeros_like(w) for w in model.weights]
            acc_b = [np.zeros_like(b) for b in model.biases]
            batch_loss = 0.0
            for idx in batch:
                out, trace = mlp_forward(model, xs[idx])
                loss, grad_out = loss_and_grad(int(idx), out)
                batch_loss += loss
                gw, gb = mlp_backprop(model, trace, grad_out)
                for i in range(len(acc_w)):
                    acc_w[i] += gw[i]
                    acc_b[i] += gb[i]
            if not np.isfinite(batch_loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch} (baseline training diverged)"
                )
            scale = 1.0 / len(batch)
            for i in range(len(vel_w)):
                vel_w[i] = cfg.momentum * vel_w[i] - cfg.learning_rate * scale * acc_w[i]
                vel_b[i] = cfg.momentum * vel_b[i] - cfg.learning_rate * scale * acc_b[i]
                model.weights[i] += vel_w[i]
                model.biases[i] += vel_b[i]
            epoch_loss += batch_loss
        history.append(epoch_loss / max(n_samples, 1))
    return model, history


def penalty_train(red: ReducedProblem, xs, baseline_cfg: BaselineConfig, train_cfg: TrainConfig,
                  hidden=(16,)):
    """Train an unconstrained full-dimension network with the penalty loss."""
    problem = red.parent
    xs = np.asarray(xs, dtype=float)
    rho = baseline_cfg.penalty_coefficient
    model = MlpModel.initialize(problem.n_inp, problem.n_opt, hidden=hidden,
                                seed=train_cfg.seed, output_activation="linear")

    def loss_and_grad(idx, u):
        x = xs[idx]
        r_eq = problem.eq_residual(u, x)
        r_in = np.maximum(problem.ineq_residual(u, x), 0.0)
        loss = float(problem.objective.value(u, x)) + rho * (float(r_eq @ r_eq) + float(r_in @ r_in))
        grad = as_vector(problem.objective.gradient_u(u, x), "gradient")
        grad = grad + rho * (2.0 * problem.a_eq.T @ r_eq + 2.0 * problem.a_ineq.T @ r_in)
        return loss, grad

    return _train_raw(model, xs, loss_and_grad, train_cfg)


def penalty_infer(model: MlpModel, x) -> np.ndarray:
    out, _ = mlp_forward(model, as_vector(x, "x"))
    return out


def dc3_correct(red: ReducedProblem, x, u0, cfg: BaselineConfig, iters=None) -> np.ndarray:
    """Gradient-descent correction on 1/2 ||max(ineq, 0)||^2 in reduced space.

    Equality completion is implicit: the point stays in the reduced space
    where equalities hold for any value, and each step only moves along the
    inequality-violation gradient.  Feasibility is NOT guaranteed.
    """
    u, _ = _dc3_correct_trace(red, as_vector(x, "x"), as_vector(u0, "u0"), cfg,
                              cfg.dc3_inner_iters_test if iters is None else iters)
    return u


def _dc3_correct_trace(red, x, u0, cfg, iters):
    u = u0.copy()
    masks = []
    eta = cfg.dc3_step_size
    for _ in range(iters):
        r = red.ineq_residual(u, x)
        mask = r > 0.0
        masks.append(mask)
        u = u - eta * (red.a_red.T @ np.where(mask, r, 0.0))
    return u, masks


def dc3_train(red: ReducedProblem, xs, baseline_cfg: BaselineConfig, train_cfg: TrainConfig,
              hidden=(16,)):
    """Train the correction baseline: completion plus unrolled correction steps.

    The training loss prices the remaining inequality violation with the
    penalty coefficient; gradients flow through the unrolled correction.
    """
    xs = np.asarray(xs, dtype=float)
    problem = red.parent
    rho = baseline_cfg.penalty_coefficient
    eta = baseline_cfg.dc3_step_size
    model = MlpModel.initialize(problem.n_inp, red.n_indep, hidden=hidden,
                                seed=train_cfg.seed, output_activation="linear")

    def loss_and_grad(idx, w0):
        x = xs[idx]
        w, masks = _dc3_correct_trace(red, x, w0, baseline_cfg,
                                      baseline_cfg.dc3_inner_iters_train)
        u_full = lift_solution(red, w, x)
        r_in = np.maximum(red.ineq_residual(w, x), 0.0)
        loss = float(problem.objective.value(u_full, x)) + rho * float(r_in @ r_in)
        grad_full = as_vector(problem.objective.gradient_u(u_full, x), "gradient")
        g = grad_full_to_indep(red, grad_full) + 2.0 * rho * (red.a_red.T @ r_in)
        # Each correction step has symmetric Jacobian I - eta * A' D_k A.
        for mask in reversed(masks):
            rows = red.a_red[mask]
            if rows.size:
                g = g - eta * (rows.T @ (rows @ g))
        return loss, g

    return _train_raw(model, xs, loss_and_grad, train_cfg)


def dc3_infer(model: MlpModel, red: ReducedProblem, x, cfg: BaselineConfig) -> np.ndarray:
    x = as_vector(x, "x")
    w0, _ = mlp_forward(model, x)
    w = dc3_correct(red, x, w0, cfg)
    return lift_solution(red, w, x)


def projection_train(red: ReducedProblem, xs, references_indep, train_cfg: TrainConfig,
                     hidden=(16,)):
    """Supervised regression in the reduced space; projection happens at inference."""
    xs = np.asarray(xs, dtype=float)
    refs = np.asarray(references_indep, dtype=float)
    model = MlpModel.initialize(red.parent.n_inp, red.n_indep, hidden=hidden,
                                seed=train_cfg.seed, output_activation="linear")

    def loss_and_grad(idx, w):
        diff = w - refs[idx]
        return float(diff @ diff), 2.0 * diff

    return _train_raw(model, xs, loss_and_grad, train_cfg)


def projection_infer(model: MlpModel, red: ReducedProblem, x) -> np.ndarray:
    x = as_vector(x, "x")
    w, _ = mlp_forward(model, x)
    return lift_solution(red, project_onto_polytope(red, x, w), x)
