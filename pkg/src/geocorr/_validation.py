"""Small input-checking helpers used by the public operations."""

import numpy as np

from .errors import PreconditionError


def as_points(points, name="points"):
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise PreconditionError(f"{name} must have shape (n, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise PreconditionError(f"{name} contains non-finite coordinates")
    return arr


def as_square(matrix, name="matrix"):
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise PreconditionError(f"{name} must be square, got shape {arr.shape}")
    return arr


def check_positive(value, name):
    if not value > 0:
        raise PreconditionError(f"{name} must be > 0, got {value!r}")
    return value


def check_probability(value, name):
    if not 0.0 <= value <= 1.0:
        raise PreconditionError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def frozen(arr):
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr
