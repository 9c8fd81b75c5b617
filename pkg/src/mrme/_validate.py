"""Small input-validation helpers used by the public entry points."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def check_positive(name: str, value) -> float:
    value = float(value)
    if not np.isfinite(value) or value <= 0.0:
        raise ValidationError(f"{name} must be positive and finite, got {value!r}")
    return value


def check_nonnegative(name: str, value) -> float:
    value = float(value)
    if not np.isfinite(value) or value < 0.0:
        raise ValidationError(f"{name} must be nonnegative and finite, got {value!r}")
    return value


def check_times(times) -> np.ndarray:
    """Validate a strictly increasing, finite time grid."""
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValidationError("time grid must be a 1-d sequence with at least 2 points")
    if not np.all(np.isfinite(t)):
        raise ValidationError("time grid contains non-finite values")
    dt = np.diff(t)
    bad = np.nonzero(dt <= 0)[0]
    if bad.size:
        k = int(bad[0])
        raise ValidationError(
            f"times must be strictly increasing; t[{k + 1}]={t[k + 1]!r} "
            f"does not exceed t[{k}]={t[k]!r}"
        )
    return t


def check_locations(locations, n_times: int) -> np.ndarray:
    """Validate an (n_times, d) array of finite coordinates."""
    x = np.asarray(locations, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValidationError("locations must be a 2-d array of shape (n_points, dim)")
    if x.shape[0] != n_times:
        raise ValidationError(
            f"locations length {x.shape[0]} does not match times length {n_times}"
        )
    if x.shape[1] < 1:
        raise ValidationError("locations need at least one coordinate column")
    if not np.all(np.isfinite(x)):
        raise ValidationError("locations contain non-finite values")
    return x
