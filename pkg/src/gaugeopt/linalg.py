"""Small dense linear-algebra helpers shared across modules."""

from __future__ import annotations

import os

import numpy as np

from .errors import RankDeficientError

#: Absolute pivot tolerance used for all numerical-rank decisions.
PIVOT_TOL = 1e-10

# Relative band inside which pivot candidates count as tied; the lowest
# index then wins so that selections are reproducible across platforms.
_TIE_REL = 1e-12


def greedy_independent_columns(mat, count=None, pivot_tol=PIVOT_TOL):
    """Select linearly independent columns of ``mat`` by greedy pivoting.

    Runs modified Gram-Schmidt with column pivoting: at every step the
    remaining column with the largest residual norm is chosen (ties broken
    toward the lowest column index) and the rest are orthogonalized against
    it.  Returns the chosen indices in selection order.

    With ``count`` given, raises RankDeficientError if fewer than ``count``
    admissible columns exist; otherwise selects as many as the numerical
    rank allows.
    """
    work = np.array(mat, dtype=float, copy=True)
    if work.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    n_rows, n_cols = work.shape
    limit = min(n_rows, n_cols) if count is None else count
    if count is not None and count > min(n_rows, n_cols):
        raise RankDeficientError(
            f"cannot select {count} independent columns from a {n_rows}x{n_cols} matrix"
        )

    chosen: list[int] = []
    for _ in range(limit):
        norms = np.linalg.norm(work, axis=0)
        if chosen:
            norms[chosen] = 0.0
        best = float(norms.max()) if n_cols else 0.0
        if best <= pivot_tol:
            if count is None:
                break
            raise RankDeficientError(
                f"only {len(chosen)} independent columns found, {count} required "
                f"(pivot tolerance {pivot_tol:g})"
            )
        candidates = np.nonzero(norms >= best * (1.0 - _TIE_REL))[0]
        j = int(candidates[0])
        chosen.append(j)
        q = work[:, j] / norms[j]
        work -= np.outer(q, q @ work)
        work[:, j] = 0.0
    return chosen


def numerical_rank(mat, pivot_tol=PIVOT_TOL) -> int:
    """Numerical rank via the same greedy pivoted sweep used for selection."""
    arr = np.asarray(mat, dtype=float)
    if arr.size == 0:
        return 0
    return len(greedy_independent_columns(arr, count=None, pivot_tol=pivot_tol))


def as_vector(value, name: str) -> np.ndarray:
    """Coerce to a float 1-D array, rejecting scalars."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        raise ValueError(f"'{name}' must be a vector, not a scalar")
    return arr.reshape(-1)


def as_matrix(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"'{name}' must be a 2-D matrix, got ndim={arr.ndim}")
    return arr


def freeze(arr: np.ndarray) -> np.ndarray:
    """Return ``arr`` marked read-only (shared-data view is fine)."""
    arr.flags.writeable = False
    return arr


def worker_count(task_size: int | None = None) -> int:
    """Worker cap honoring the LOOP_LC_THREADS environment variable.

    Defaults to a single worker; parallel sections stay deterministic by
    collecting results in submission order.
    """
    raw = os.environ.get("LOOP_LC_THREADS", "").strip()
    if not raw:
        return 1
    try:
        cap = int(raw)
    except ValueError:
        return 1
    cap = max(1, cap)
    if task_size is not None:
        cap = min(cap, max(1, task_size))
    return cap
