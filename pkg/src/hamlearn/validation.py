"""Small input-validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

import numpy as np


def check_matrix(X, name: str = "X", n_cols: int | None = None) -> np.ndarray:
    """Coerce to a finite 2D float64 array, optionally with a fixed column
    count."""
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError(f"{name} must be a non-empty 2D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if n_cols is not None and arr.shape[1] != n_cols:
        raise ValueError(f"{name} has {arr.shape[1]} columns, expected {n_cols}")
    return arr


def check_phase_matrix(X, name: str = "X") -> np.ndarray:
    """A matrix of phase-space rows must have an even column count
    (q coordinates followed by p coordinates)."""
    arr = check_matrix(X, name=name)
    if arr.shape[1] % 2 != 0:
        raise ValueError(
            f"{name} has {arr.shape[1]} columns; phase-space rows need an even count"
        )
    return arr


def check_state_vector(y, dim: int, name: str = "state") -> np.ndarray:
    arr = np.asarray(y, dtype=np.float64).ravel()
    if arr.size != dim:
        raise ValueError(f"{name} has {arr.size} entries, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr
