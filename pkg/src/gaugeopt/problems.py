"""Canonical linearly constrained problem, objective contract, and metrics.

The problem solved throughout the package is

    min  f(u, x)
    s.t. a_eq   u + b_mat_eq   x + b_vec_eq   = 0
         a_ineq u + b_mat_ineq x + b_vec_ineq <= 0

where ``u`` is the optimization vector (dimension ``n_opt``) and ``x`` an
exogenous input vector (dimension ``n_inp``).  The equality block must be
under-determined: rank(a_eq) = n_eq < n_opt.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .linalg import as_matrix, as_vector, freeze, numerical_rank, PIVOT_TOL


@dataclass(frozen=True)
class ObjectiveHandle:
    """Objective contract: a value callable and its gradient in ``u``.

    Both callables take ``(u, x)`` with 1-D float arrays.  ``spec`` is an
    optional JSON-serializable description used for problem files and
    hashing; handles built from arbitrary callables leave it None.
    """

    value: Callable[[np.ndarray, np.ndarray], float]
    gradient_u: Callable[[np.ndarray, np.ndarray], np.ndarray]
    spec: dict | None = None


def quadratic_objective(q, c) -> ObjectiveHandle:
    """f(u, x) = 1/2 u'Qu + c'u with gradient Qu + c."""
    q = as_matrix(q, "q")
    c = as_vector(c, "c")
    if q.shape != (c.size, c.size):
        raise ValueError(f"q must be {c.size}x{c.size} to match c, got {q.shape}")
    q = freeze(q.copy())
    c = freeze(c.copy())

    def value(u, x):
        return 0.5 * float(u @ q @ u) + float(c @ u)

    def gradient_u(u, x):
        return q @ u + c

    spec = {"quadratic": {"Q": q.tolist(), "c": c.tolist()}}
    return ObjectiveHandle(value=value, gradient_u=gradient_u, spec=spec)


def _sum_squares_value(u, x):
    return 0.5 * float(u @ u)


def _sum_squares_grad(u, x):
    return np.array(u, dtype=float, copy=True)


def _nonconvex_cos_value(u, x):
    # Smooth multi-well test function: convex bowl plus cosine ripples.
    return 0.5 * float(u @ u) + 0.5 * float(np.sum(np.cos(3.0 * u)))


def _nonconvex_cos_grad(u, x):
    return u - 1.5 * np.sin(3.0 * u)


BUILTIN_OBJECTIVES = {
    "sum_squares": (_sum_squares_value, _sum_squares_grad),
    "nonconvex_cos": (_nonconvex_cos_value, _nonconvex_cos_grad),
}


def builtin_objective(name: str) -> ObjectiveHandle:
    try:
        value, grad = BUILTIN_OBJECTIVES[name]
    except KeyError:
        known = ", ".join(sorted(BUILTIN_OBJECTIVES))
        raise ValueError(f"unknown builtin objective '{name}' (known: {known})") from None
    return ObjectiveHandle(value=value, gradient_u=grad, spec={"builtin": name})


@dataclass(frozen=True)
class LinConProblem:
    """Immutable container for one linearly constrained problem instance."""

    a_eq: np.ndarray
    b_mat_eq: np.ndarray
    b_vec_eq: np.ndarray
    a_ineq: np.ndarray
    b_mat_ineq: np.ndarray
    b_vec_ineq: np.ndarray
    objective: ObjectiveHandle
    n_opt: int = field(init=False)
    n_inp: int = field(init=False)
    n_eq: int = field(init=False)
    n_ineq: int = field(init=False)

    def __post_init__(self):
        for name in ("a_eq", "b_mat_eq", "a_ineq", "b_mat_ineq"):
            arr = as_matrix(getattr(self, name), name)
            object.__setattr__(self, name, freeze(arr.astype(float, copy=True)))
        for name in ("b_vec_eq", "b_vec_ineq"):
            arr = as_vector(getattr(self, name), name)
            object.__setattr__(self, name, freeze(arr.astype(float, copy=True)))
        n_opt = self.a_ineq.shape[1] if self.a_eq.shape[0] == 0 else self.a_eq.shape[1]
        object.__setattr__(self, "n_opt", int(n_opt))
        object.__setattr__(self, "n_inp", int(self.b_mat_ineq.shape[1]))
        object.__setattr__(self, "n_eq", int(self.a_eq.shape[0]))
        object.__setattr__(self, "n_ineq", int(self.a_ineq.shape[0]))

    def eq_residual(self, u, x) -> np.ndarray:
        return self.a_eq @ u + self.b_mat_eq @ x + self.b_vec_eq

    def ineq_residual(self, u, x) -> np.ndarray:
        return self.a_ineq @ u + self.b_mat_ineq @ x + self.b_vec_ineq


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    rank_a_eq: int
    findings: tuple[str, ...]


def validate(problem: LinConProblem) -> ValidationReport:
    """Check dimension consistency and the under-determined rank rule.

    Findings are reported rather than raised; ``ok`` is True iff none.
    """
    findings: list[str] = []
    p = problem
    if p.a_eq.shape[0] and p.a_eq.shape[1] != p.n_opt:
        findings.append(f"a_eq has {p.a_eq.shape[1]} columns, expected n_opt={p.n_opt}")
    if p.a_ineq.shape[1] != p.n_opt:
        findings.append(f"a_ineq has {p.a_ineq.shape[1]} columns, expected n_opt={p.n_opt}")
    if p.b_mat_eq.shape != (p.n_eq, p.n_inp):
        findings.append(f"b_mat_eq shape {p.b_mat_eq.shape} != ({p.n_eq}, {p.n_inp})")
    if p.b_vec_eq.shape != (p.n_eq,):
        findings.append(f"b_vec_eq length {p.b_vec_eq.size} != n_eq={p.n_eq}")
    if p.b_mat_ineq.shape != (p.n_ineq, p.n_inp):
        findings.append(f"b_mat_ineq shape {p.b_mat_ineq.shape} != ({p.n_ineq}, {p.n_inp})")
    if p.b_vec_ineq.shape != (p.n_ineq,):
        findings.append(f"b_vec_ineq length {p.b_vec_ineq.size} != n_ineq={p.n_ineq}")

    rank = numerical_rank(p.a_eq, pivot_tol=PIVOT_TOL) if p.n_eq else 0
    if p.n_eq:
        if rank < p.n_eq:
            findings.append(f"a_eq is rank-deficient: rank {rank} < n_eq {p.n_eq}")
        if p.n_eq >= p.n_opt:
            findings.append(
                f"equality block is not under-determined: n_eq {p.n_eq} >= n_opt {p.n_opt}"
            )
    return ValidationReport(ok=not findings, rank_a_eq=rank, findings=tuple(findings))


def feasibility_gap(problem: LinConProblem, pairs: Sequence[tuple]) -> float:
    """Mean l1 constraint violation over (u, x) pairs.

    Per pair: || max(a_ineq u + b_mat_ineq x + b_vec_ineq, 0) ||_1
            + || a_eq u + b_mat_eq x + b_vec_eq ||_1, averaged over the batch.
    """
    if len(pairs) == 0:
        raise ValueError("pairs must be non-empty")
    total = 0.0
    for u, x in pairs:
        u = as_vector(u, "u")
        x = as_vector(x, "x")
        total += float(np.sum(np.maximum(problem.ineq_residual(u, x), 0.0)))
        total += float(np.sum(np.abs(problem.eq_residual(u, x))))
    return total / len(pairs)


def optimality_gap(predicted: Sequence, reference: Sequence) -> float:
    """Mean relative l1 distance to the reference optima.

    (1/N) sum_i ||u_i - u*_i||_1 / ||u*_i||_1; every reference must be
    nonzero in l1.
    """
    if len(predicted) != len(reference):
        raise ValueError(f"batch size mismatch: {len(predicted)} vs {len(reference)}")
    if len(predicted) == 0:
        raise ValueError("batch must be non-empty")
    total = 0.0
    for u, u_star in zip(predicted, reference):
        u = as_vector(u, "predicted")
        u_star = as_vector(u_star, "reference")
        denom = float(np.sum(np.abs(u_star)))
        if denom == 0.0:
            raise ValueError("reference vector has zero l1 norm")
        total += float(np.sum(np.abs(u - u_star))) / denom
    return total / len(predicted)


@dataclass(frozen=True)
class MetricsReport:
    optimality_gap: float
    feasibility_gap: float
    mean_time_per_instance: float

    def __post_init__(self):
        for name in ("optimality_gap", "feasibility_gap", "mean_time_per_instance"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {v!r}")


# ---------------------------------------------------------------------------
# Problem file format: dense row-major matrices plus a tagged objective.
# ---------------------------------------------------------------------------

def problem_to_dict(problem: LinConProblem) -> dict:
    if problem.objective.spec is None:
        raise ValueError(
            "objective has no serializable spec; build it via quadratic_objective "
            "or builtin_objective to write problem files"
        )
    return {
        "a_eq": problem.a_eq.tolist(),
        "b_mat_eq": problem.b_mat_eq.tolist(),
        "b_vec_eq": problem.b_vec_eq.tolist(),
        "a_ineq": problem.a_ineq.tolist(),
        "b_mat_ineq": problem.b_mat_ineq.tolist(),
        "b_vec_ineq": problem.b_vec_ineq.tolist(),
        "objective": problem.objective.spec,
    }


def _objective_from_spec(spec: dict) -> ObjectiveHandle:
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ValueError("objective must be a one-key tagged union")
    tag, payload = next(iter(spec.items()))
    if tag == "quadratic":
        return quadratic_objective(payload["Q"], payload["c"])
    if tag == "builtin":
        return builtin_objective(payload)
    raise ValueError(f"unknown objective tag '{tag}'")


def problem_from_dict(doc: dict) -> LinConProblem:
    required = ("a_eq", "b_mat_eq", "b_vec_eq", "a_ineq", "b_mat_ineq", "b_vec_ineq", "objective")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ValueError(f"problem document missing keys: {missing}")
    return LinConProblem(
        a_eq=np.asarray(doc["a_eq"], dtype=float).reshape(len(doc["a_eq"]), -1)
        if doc["a_eq"]
        else np.zeros((0, len(doc["a_ineq"][0]) if doc["a_ineq"] else 0)),
        b_mat_eq=np.asarray(doc["b_mat_eq"], dtype=float).reshape(len(doc["b_mat_eq"]), -1)
        if doc["b_mat_eq"]
        else np.zeros((0, len(doc["b_mat_ineq"][0]) if doc["b_mat_ineq"] else 0)),
        b_vec_eq=np.asarray(doc["b_vec_eq"], dtype=float),
        a_ineq=np.asarray(doc["a_ineq"], dtype=float),
        b_mat_ineq=np.asarray(doc["b_mat_ineq"], dtype=float),
        b_vec_ineq=np.asarray(doc["b_vec_ineq"], dtype=float),
        objective=_objective_from_spec(doc["objective"]),
    )


def load_problem(path) -> LinConProblem:
    with open(path, "r", encoding="utf-8") as fh:
        return problem_from_dict(json.load(fh))


def save_problem(problem: LinConProblem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(problem_to_dict(problem), fh, indent=2)
        fh.write("\n")


def problem_hash(problem: LinConProblem) -> str:
    """Stable sha256 over the canonical problem document."""
    if problem.objective.spec is None:
        objective = {"opaque": "custom-callable"}
    else:
        objective = problem.objective.spec
    doc = {
        "a_eq": problem.a_eq.tolist(),
        "b_mat_eq": problem.b_mat_eq.tolist(),
        "b_vec_eq": problem.b_vec_eq.tolist(),
        "a_ineq": problem.a_ineq.tolist(),
        "b_mat_ineq": problem.b_mat_ineq.tolist(),
        "b_vec_ineq": problem.b_vec_ineq.tolist(),
        "objective": objective,
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()
