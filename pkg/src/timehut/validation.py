"""Input validation helpers for array-facing entry points."""

from __future__ import annotations

import numpy as np


def as_series_array(X, allow_nan: bool = True) -> np.ndarray:
    """Coerce input to an ``(n, T, N)`` float array.

    Accepts ``(n, T)`` (treated as univariate) or ``(n, T, N)``; NaN marks
    missing values and is allowed by default.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 2:
        X = X[:, :, None]
    if X.ndim != 3:
        raise ValueError(f"expected (n, T) or (n, T, N) input, got shape {X.shape}")
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"input has an empty axis: shape {X.shape}")
    if not allow_nan and np.isnan(X).any():
        raise ValueError("input contains NaN but allow_nan=False")
    if np.isinf(X).any():
        raise ValueError("input contains infinite values")
    return X


def as_label_vector(y, n: int) -> np.ndarray:
    """Coerce labels to an int vector of length ``n``."""
    y = np.asarray(y)
    if y.shape != (n,):
        raise ValueError(f"labels must have shape ({n},), got {y.shape}")
    return y.astype(np.int64)


def check_fitted(obj, attribute: str) -> None:
    if not hasattr(obj, attribute):
        raise RuntimeError(
            f"{type(obj).__name__} is not fitted yet; call fit() before this method"
        )
