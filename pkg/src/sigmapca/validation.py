"""Input validation helpers shared by the functional ops and the estimators."""

import numpy as np


def check_data(X, name="X", min_samples=1):
    """Coerce to a finite float64 2-D array of shape (n_samples, n_features)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {X.shape}")
    if X.shape[0] < min_samples:
        raise ValueError(f"{name} needs at least {min_samples} samples, got {X.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains NaN or Inf")
    return X


def check_weights(W, p=None, name="W"):
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {W.shape}")
    if p is not None and W.shape[0] != p:
        raise ValueError(f"{name} has {W.shape[0]} rows, expected {p}")
    if not np.all(np.isfinite(W)):
        raise ValueError(f"{name} contains NaN or Inf")
    return W


def check_rank(k, limit, what="rank"):
    k = int(k)
    if not 1 <= k <= limit:
        raise ValueError(f"{what} must be in [1, {limit}], got {k}")
    return k


def check_rng(seed):
    """Accept an int seed or an existing Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
