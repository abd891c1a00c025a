"""Input validation helpers shared by the estimator-facing modules."""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, EmptyInput, ZeroVector

__all__ = ["as_matrix", "as_vector", "normalize_rows"]


def as_matrix(X, dtype=np.float64) -> np.ndarray:
    """Coerce to a finite (n, D) float matrix with n >= 1."""
    M = np.asarray(X, dtype=dtype)
    if M.ndim != 2:
        raise DimensionMismatch(f"expected a 2-d array of vectors, got shape {M.shape}")
    if M.shape[0] == 0 or M.shape[1] == 0:
        raise EmptyInput("need at least one vector with at least one dimension")
    if not np.isfinite(M).all():
        raise ValueError("vectors contain NaN or infinity")
    return M


def as_vector(v, dim: int | None = None, dtype=np.float64) -> np.ndarray:
    """Coerce to a finite 1-d vector, optionally of a required dimension."""
    a = np.asarray(v, dtype=dtype).reshape(-1)
    if dim is not None and a.shape[0] != dim:
        raise DimensionMismatch(f"expected dimension {dim}, got {a.shape[0]}")
    if not np.isfinite(a).all():
        raise ValueError("vector contains NaN or infinity")
    return a


def normalize_rows(M: np.ndarray) -> np.ndarray:
    """L2-normalize each row; zero rows are an error."""
    norms = np.linalg.norm(M, axis=1)
    if np.any(norms < 1e-12):
        raise ZeroVector("cannot unit-normalize a zero vector")
    return M / norms[:, None]
