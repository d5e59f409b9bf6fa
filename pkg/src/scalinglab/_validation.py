"""Small input-validation helpers shared by the public entry points."""

import numbers

import numpy as np

from .errors import DomainError

SUPPORTED_DIMS = (2, 3, 4)


def check_dim(d):
    if not isinstance(d, numbers.Integral) or int(d) not in SUPPORTED_DIMS:
        raise DomainError(f"spacetime dimension must be one of {SUPPORTED_DIMS}, got {d!r}")
    return int(d)


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")
    return value


def check_nonnegative(value, name):
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise DomainError(f"{name} must be a nonnegative finite number, got {value!r}")
    return value


def check_vector(v, d, name):
    arr = np.asarray(v, dtype=float).reshape(-1)
    if arr.shape != (d,):
        raise DomainError(f"{name} must have {d} components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def check_axis(nu, d):
    if not isinstance(nu, numbers.Integral) or not 0 <= nu < d:
        raise DomainError(f"axis index must satisfy 0 <= nu < {d}, got {nu!r}")
    return int(nu)


def check_decreasing(values, name):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError(f"{name} must be a non-empty 1-d sequence")
    if np.any(arr <= 0) or np.any(np.diff(arr) >= 0):
        raise DomainError(f"{name} must be positive and strictly decreasing")
    return arr


def minkowski_metric(d):
    return np.diag([1.0] + [-1.0] * (d - 1))
