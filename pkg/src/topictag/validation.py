"""Input validation helpers shared by the numerical modules."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def as_dense_matrix(X) -> np.ndarray:
    """Coerce a TfidfMatrix, scipy sparse matrix, or array-like to a dense 2-D float array."""
    if hasattr(X, "matrix"):  # TfidfMatrix
        X = X.matrix
    if sp.issparse(X):
        X = X.toarray()
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix contains non-finite entries")
    return arr


def check_non_negative(X: np.ndarray, name: str = "X") -> np.ndarray:
    if np.any(X < 0):
        raise ValueError(f"{name} must be non-negative")
    return X
