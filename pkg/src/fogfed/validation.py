"""Small input-validation helpers shared by the dataset, network, and estimator code."""

from __future__ import annotations

import numpy as np


def as_feature_matrix(X, name: str = "X") -> np.ndarray:
    """Coerce to a 2-D float32 matrix of finite values."""
    arr = np.asarray(X, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional (rows, features), got ndim={arr.ndim}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf values")
    return arr


def as_label_vector(y, n_rows: int | None = None, name: str = "y") -> np.ndarray:
    """Coerce to a 1-D vector of non-negative integer class indices."""
    arr = np.asarray(y)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got ndim={arr.ndim}")
    if not np.issubdtype(arr.dtype, np.integer):
        rounded = np.asarray(arr, dtype=np.float64)
        if not np.all(rounded == np.floor(rounded)):
            raise ValueError(f"{name} must contain integer class indices")
        arr = rounded.astype(np.int64)
    else:
        arr = arr.astype(np.int64)
    if arr.size and arr.min() < 0:
        raise ValueError(f"{name} contains negative class indices")
    if n_rows is not None and arr.shape[0] != n_rows:
        raise ValueError(f"{name} has {arr.shape[0]} entries but expected {n_rows} rows")
    return arr


def check_positive_int(value: int, name: str, minimum: int = 1) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise ValueError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)
