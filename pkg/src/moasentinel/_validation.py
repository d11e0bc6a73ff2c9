"""Input validation helpers used by the estimators.

Kept deliberately small: coerce to float arrays, check shapes and
finiteness, and raise DataFormatError with a usable message. The
estimators call these at their public boundaries so the numerical code
below can assume clean inputs.
"""

from __future__ import annotations

import numpy as np

from .errors import DataFormatError


def as_float_vector(values, name: str = "values", min_len: int = 1) -> np.ndarray:
    """Coerce a 1-D sequence to a finite float64 array of length >= min_len."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise DataFormatError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < min_len:
        raise DataFormatError(f"{name} needs at least {min_len} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise DataFormatError(f"{name} contains a non-finite value at index {bad}")
    return arr


def as_feature_matrix(X, n_features: int, name: str = "X") -> np.ndarray:
    """Coerce to a finite (n_samples, n_features) float64 matrix."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] != n_features:
        raise DataFormatError(
            f"{name} must have shape (n_samples, {n_features}), got {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise DataFormatError(f"{name} contains non-finite entries")
    return arr


def check_fitted(estimator, attribute: str) -> None:
    """Raise if a fitted attribute is missing (estimator used before fit)."""
    if getattr(estimator, attribute, None) is None:
        raise DataFormatError(
            f"{type(estimator).__name__} is not fitted; call fit() first"
        )


def check_seed(seed) -> int:
    """Seeds must be non-negative ints so RNG streams can be derived from them."""
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool) or seed < 0:
        raise DataFormatError(f"seed must be a non-negative integer, got {seed!r}")
    return int(seed)
