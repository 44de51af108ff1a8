"""Recovery metrics: component matching, Amari index, orthogonality residual,
variance recovery, and 2-D rotation angle error."""

import itertools
from dataclasses import dataclass

import numpy as np

from .validation import check_data


@dataclass
class MatchReport:
    """perm maps recovered column i to true source perm[i]; corrs are |corr|."""

    perm: np.ndarray
    signs: np.ndarray
    corrs: np.ndarray
    method: str

    @property
    def min_corr(self):
        return float(np.min(self.corrs))

    @property
    def total(self):
        return float(np.sum(self.corrs))


def _corr_matrix(Y, S0):
    """Signed correlations between columns; constant columns correlate 0."""
    Yc = Y - Y.mean(axis=0)
    Sc = S0 - S0.mean(axis=0)
    sy = np.linalg.norm(Yc, axis=0)
    ss = np.linalg.norm(Sc, axis=0)
    sy = np.where(sy < 1e-300, np.inf, sy)
    ss = np.where(ss < 1e-300, np.inf, ss)
    return (Yc.T @ Sc) / sy[:, None] / ss[None, :]


def match_components(Y, S0, mode="brute_force"):
    """Assign recovered components to true sources maximising total |corr|."""
    Y = check_data(Y, name="Y")
    S0 = check_data(S0, name="S0")
    if Y.shape != S0.shape:
        raise ValueError("recovered and true source matrices must match in shape")
    k = Y.shape[1]
    C = _corr_matrix(Y, S0)
    A = np.abs(C)
    if mode == "brute_force":
        if k > 6:
            raise ValueError("brute_force matching is limited to k <= 6")
        best, best_perm = -np.inf, None
        for perm in itertools.permutations(range(k)):
            total = sum(A[i, perm[i]] for i in range(k))
            if total > best:
                best, best_perm = total, perm
        perm = np.asarray(best_perm)
    elif mode == "greedy":
        perm = np.full(k, -1)
        work = A.copy()
        for _ in range(k):
            i, j = np.unravel_index(np.argmax(work), work.shape)
            perm[i] = j
            work[i, :] = -np.inf
            work[:, j] = -np.inf
    else:
        raise ValueError(f"unknown mode {mode!r}")
    corrs = A[np.arange(k), perm]
    signs = np.sign(C[np.arange(k), perm])
    signs[signs == 0] = 1.0
    return MatchReport(perm=perm, signs=signs, corrs=corrs, method=mode)


def amari_index(B, B0_inv):
    """Normalised cross-talk of P = B0_inv B; zero iff scaled signed permutation."""
    P = np.abs(np.asarray(B0_inv) @ np.asarray(B))
    k = P.shape[0]
    if P.shape[0] != P.shape[1]:
        raise ValueError("amari index needs a square cross-talk matrix")
    row = np.sum(P / np.max(P, axis=1, keepdims=True), axis=1) - 1.0
    col = np.sum(P / np.max(P, axis=0, keepdims=True), axis=0) - 1.0
    return float((row.sum() + col.sum()) / (2.0 * k * (k - 1)))


def orth_residual(W):
    W = np.asarray(W)
    return float(np.linalg.norm(W.T @ W - np.eye(W.shape[1])))


def variance_error(sigma_est, sigma0):
    """Relative per-component std error, max over components."""
    sigma_est = np.asarray(sigma_est, dtype=np.float64)
    sigma0 = np.asarray(sigma0, dtype=np.float64)
    return float(np.max(np.abs(sigma_est - sigma0) / sigma0))


def rotation_angle_error(W, theta):
    """Angle mismatch of a 2-D basis, modulo quarter turns (sign/permutation)."""
    theta_hat = float(np.arctan2(W[1, 0], W[0, 0]))
    err = (theta_hat - theta) % (np.pi / 2.0)
    return float(min(err, np.pi / 2.0 - err))


def metrics(B=None, B0_inv=None, W=None, sigma_est=None, sigma0=None, theta=None):
    """Bundle the scalar metrics that the given inputs allow."""
    out = {}
    if B is not None and B0_inv is not None:
        out["amari"] = amari_index(B, B0_inv)
    if W is not None:
        out["orth_residual"] = orth_residual(W)
    if sigma_est is not None and sigma0 is not None:
        out["var_error"] = variance_error(sigma_est, sigma0)
    if W is not None and theta is not None:
        out["angle_error"] = rotation_angle_error(W, theta)
    return out
