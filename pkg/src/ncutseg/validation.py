"""Input validation helpers used across estimators and functions."""

from __future__ import annotations

import numpy as np

from .errors import DataError


def check_points(points, *, dim: int = 3, allow_empty: bool = True, name: str = "points") -> np.ndarray:
    """Return a contiguous float64 array of shape (n, dim).

    Rejects non-finite values and wrong shapes.
    """
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, dim)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DataError(f"{name} must have shape (n, {dim}), got {arr.shape}")
    if not allow_empty and arr.shape[0] == 0:
        raise DataError(f"{name} must be non-empty")
    if arr.size and not np.isfinite(arr).all():
        raise DataError(f"{name} contains non-finite values")
    return np.ascontiguousarray(arr)


def check_vector(values, *, n: int | None = None, name: str = "values") -> np.ndarray:
    """Return a 1-d float64 array, optionally of fixed length."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    if n is not None and arr.shape[0] != n:
        raise DataError(f"{name} must have length {n}, got {arr.shape[0]}")
    if arr.size and not np.isfinite(arr).all():
        raise DataError(f"{name} contains non-finite values")
    return arr


def check_labels(labels, *, n: int | None = None, name: str = "labels") -> np.ndarray:
    """Return a 1-d int64 label array with non-negative entries."""
    arr = np.asarray(labels)
    if arr.ndim != 1:
        raise DataError(f"{name} must be 1-d, got shape {arr.shape}")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise DataError(f"{name} must be integral")
    arr = arr.astype(np.int64)
    if n is not None and arr.shape[0] != n:
        raise DataError(f"{name} must have length {n}, got {arr.shape[0]}")
    if arr.size and arr.min() < 0:
        raise DataError(f"{name} must be non-negative")
    return arr


def check_positive(value: float, name: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise DataError(f"{name} must be positive, got {value}")
    return value


def check_seed(seed) -> int:
    seed = int(seed)
    if seed < 0:
        raise DataError(f"seed must be non-negative, got {seed}")
    return seed
