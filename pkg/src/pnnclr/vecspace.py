"""Dense vector/matrix primitives, normalization, and similarity kernels.

Embeddings are plain float64 numpy arrays. All operations are pure and
double precision; shape violations raise DimensionMismatch and degenerate
norms raise ZeroVector.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch, NonFinite, ZeroVector

ZERO_NORM_TOL = 1e-12
UNIT_NORM_TOL = 1e-6


def check_finite(a: np.ndarray, what: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise NonFinite(f"{what} contains NaN/Inf")
    return a


def normalize(v: np.ndarray) -> np.ndarray:
    """Scale v to unit Euclidean norm; direction preserved."""
    v = np.asarray(v, dtype=np.float64)
    n = float(np.linalg.norm(v))
    if n < ZERO_NORM_TOL:
        raise ZeroVector(f"cannot normalize vector with norm {n:.3e}")
    return v / n


def normalize_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise unit normalization of a 2-D array."""
    m = np.asarray(m, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms < ZERO_NORM_TOL):
        raise ZeroVector("row with (numerically) zero norm")
    return m / norms[:, None]


def is_unit(v: np.ndarray, tol: float = UNIT_NORM_TOL) -> bool:
    return abs(float(np.linalg.norm(v)) - 1.0) <= tol


def cosine_sim(a: np.ndarray, b: np.ndarray) -> float:
    """Dot product of unit vectors, clamped to [-1, 1] to absorb rounding."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"cosine_sim: {a.shape} vs {b.shape}")
    return float(np.clip(np.dot(a, b), -1.0, 1.0))


def matvec(m: np.ndarray, v: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != v.shape[0]:
        raise DimensionMismatch(f"matvec: {m.shape} x {v.shape}")
    return m @ v


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"matmul: {a.shape} x {b.shape}")
    return a @ b


def transpose(m: np.ndarray) -> np.ndarray:
    return np.asarray(m, dtype=np.float64).T
