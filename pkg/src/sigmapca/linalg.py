"""Dense matrix primitives: thin SVD, PCA via SVD, moment statistics, seeded inits.

Conventions used throughout the package:
  * data matrices are (n_samples, n_features), one observation per row
  * variances are the biased (1/n) estimator
  * all computation is float64
"""

from dataclasses import dataclass

import numpy as np

from .validation import check_data, check_rank, check_rng

# Floor applied wherever a standard deviation is inverted.
EPS_STD = 1e-9


@dataclass
class SvdResult:
    """Thin SVD X = U @ diag(S) @ V.T with S non-negative and descending."""

    U: np.ndarray  # (n, k), semi-orthogonal
    S: np.ndarray  # (k,)
    V: np.ndarray  # (p, k), semi-orthogonal


@dataclass
class PcaBasis:
    """Principal axes (columns of W), standard deviations, and data mean."""

    W: np.ndarray      # (p, k), orthonormal columns
    sigma: np.ndarray  # (k,), non-increasing
    mean: np.ndarray   # (p,)


@dataclass
class MomentState:
    """Running mean/variance tracked with an exponential moving average."""

    mu_hat: np.ndarray
    var_hat: np.ndarray
    alpha: float = 0.9
    eps: float = EPS_STD

    def __post_init__(self):
        self.mu_hat = np.asarray(self.mu_hat, dtype=np.float64).copy()
        self.var_hat = np.asarray(self.var_hat, dtype=np.float64).copy()
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must be in [0, 1), got {self.alpha}")
        if np.any(self.var_hat < 0):
            raise ValueError("var_hat entries must be >= 0")


def _fix_signs(U, V):
    """Deterministic sign convention: largest-magnitude entry of each V column > 0."""
    k = V.shape[1]
    idx = np.argmax(np.abs(V), axis=0)
    flip = np.sign(V[idx, np.arange(k)])
    flip[flip == 0] = 1.0
    return U * flip, V * flip


def svd_thin(X, k):
    """Rank-k thin SVD of X with the deterministic sign convention applied."""
    X = check_data(X)
    n, p = X.shape
    k = check_rank(k, min(n, p), "svd rank")
    U, S, Vt = np.linalg.svd(X, full_matrices=False)
    U, S, V = U[:, :k], S[:k].copy(), Vt[:k].T
    U, V = _fix_signs(U, V)
    return SvdResult(U=U, S=S, V=V)


def pca_fit_svd(X, k):
    """PCA basis from the SVD of the centred data; sigma = singular values / sqrt(n)."""
    X = check_data(X, min_samples=2)
    n, p = X.shape
    if k > p:
        raise ValueError(f"k={k} exceeds feature dimension {p}")
    mean = X.mean(axis=0)
    res = svd_thin(X - mean, k)
    return PcaBasis(W=res.V, sigma=res.S / np.sqrt(n), mean=mean)


def moment_stats(Y, state=None):
    """Batch mean and biased variance per column; with a MomentState, EMA-update it.

    The returned values are statistics: downstream gradients treat them as
    constants (stop-gradient).
    """
    Y = check_data(Y, name="Y")
    mu = Y.mean(axis=0)
    var = Y.var(axis=0)
    if state is None:
        return mu, var
    state.mu_hat = state.alpha * state.mu_hat + (1.0 - state.alpha) * mu
    state.var_hat = state.alpha * state.var_hat + (1.0 - state.alpha) * var
    return state.mu_hat.copy(), state.var_hat.copy()


def safe_std(var, eps=EPS_STD):
    """Standard deviation with the inversion floor applied."""
    return np.maximum(np.sqrt(np.maximum(var, 0.0)), eps)


def random_semi_orthogonal(p, k, seed):
    """Orthonormalized standard-normal draw, deterministic per seed."""
    if k > p:
        raise ValueError(f"k={k} exceeds p={p}")
    rng = check_rng(seed)
    G = rng.standard_normal((p, k))
    Q, R = np.linalg.qr(G)
    sign = np.sign(np.diag(R))
    sign[sign == 0] = 1.0
    return Q * sign
