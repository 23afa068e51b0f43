"""Shared input-validation helpers."""

import numpy as np


def as_finite_array(values, name: str, ndim: int = 1) -> np.ndarray:
    """Convert to a float64 array and reject NaN/inf entries."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.sum(~np.isfinite(arr)))
        raise ValueError(f"{name} contains {bad} non-finite value(s)")
    return arr


def as_nonempty_scores(values, name: str) -> np.ndarray:
    arr = as_finite_array(values, name)
    if arr.size == 0:
        raise ValueError(f"{name} must not be empty")
    return arr


def check_unit_interval(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_positive(value, name: str):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return value
