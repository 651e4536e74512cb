"""Input validation helpers shared by the estimator API."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array


def check_states(X) -> np.ndarray:
    """Validate an (N, 3) state matrix (velocity, acceleration, turn rate)."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != 3:
        raise ValueError(f"expected 3 state features, got {X.shape[1]}")
    return X


def check_targets(y, horizon: int) -> np.ndarray:
    """Validate targets as (N, H, 2); accepts flattened (N, 2H) as well."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 2 and y.shape[1] == 2 * horizon:
        y = y.reshape(len(y), horizon, 2)
    if y.ndim != 3 or y.shape[1:] != (horizon, 2):
        raise ValueError(f"expected targets (N, {horizon}, 2), got {y.shape}")
    if not np.isfinite(y).all():
        raise ValueError("targets must be finite")
    return y


def check_raster_batch(images, n: int) -> np.ndarray:
    """Validate uint8 images of shape (N, n, n, 3)."""
    arr = np.asarray(images)
    if arr.ndim == 3:
        arr = arr[None]
    if arr.dtype != np.uint8:
        raise ValueError("rasters must be uint8")
    if arr.ndim != 4 or arr.shape[1:] != (n, n, 3):
        raise ValueError(f"expected rasters (N, {n}, {n}, 3), got {arr.shape}")
    return arr


def check_raster_state_pair(X, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Validate the (rasters, states) input pair used by the CNN regressor."""
    if not isinstance(X, (tuple, list)) or len(X) != 2:
        raise ValueError("X must be a (rasters, states) pair")
    rasters = check_raster_batch(X[0], n)
    states = check_states(X[1])
    if len(rasters) != len(states):
        raise ValueError(f"{len(rasters)} rasters vs {len(states)} states")
    return rasters, states
