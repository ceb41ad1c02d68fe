"""Input coercion shared by the estimator classes and the functional API."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array

from .exceptions import DataError, DomainError
from .simulate import SamplePath


def check_series(X) -> np.ndarray:
    """Return a finite 1-D float array from a vector or single-column matrix."""
    try:
        arr = check_array(X, ensure_2d=False, dtype=np.float64, ensure_all_finite=True)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise DataError(f"expected a single series, got shape {arr.shape}")
        arr = arr[:, 0]
    return arr


def as_path(X, h=None) -> SamplePath:
    """Coerce ``X`` (a SamplePath or array-like of observations) to a SamplePath."""
    if isinstance(X, SamplePath):
        if h is not None and not np.isclose(h, X.step, rtol=1e-12, atol=0):
            raise DomainError(f"h={h} disagrees with the path step {X.step}")
        if not np.all(np.isfinite(X.values)):
            raise DataError("path contains non-finite values")
        return X
    if h is None:
        raise DomainError("the observation step h is required for array input")
    return SamplePath(float(h), check_series(X))
