"""Input validation helpers shared across the package.

All numeric inputs are normalised to float64 ndarrays up front; NaN/Inf
never make it past these checks.
"""

from __future__ import annotations

import numpy as np


def as_float_matrix(x, name: str = "array") -> np.ndarray:
    """Coerce to a finite 2-D float64 array with at least one row and column."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be at least 1x1, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def as_float_vector(x, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float64 array with at least one entry."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size < 1:
        raise ValueError(f"{name} must have at least one entry")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def as_label_vector(y, num_classes: int | None = None, name: str = "labels") -> np.ndarray:
    """Coerce to a 1-D int64 vector of class indices, optionally bounded."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size < 1:
        raise ValueError(f"{name} must have at least one entry")
    if not np.issubdtype(arr.dtype, np.integer):
        flo = np.asarray(arr, dtype=np.float64)
        if not np.isfinite(flo).all() or np.any(flo != np.round(flo)):
            raise ValueError(f"{name} must hold integral class indices")
        arr = flo.astype(np.int64)
    else:
        arr = arr.astype(np.int64)
    if arr.min() < 0:
        raise ValueError(f"{name} contains negative class indices")
    if num_classes is not None and arr.max() >= num_classes:
        raise ValueError(
            f"{name} contains index {int(arr.max())} but only "
            f"{num_classes} classes are declared"
        )
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "arrays") -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what} must share a shape, got {a.shape} vs {b.shape}")
