"""Unit-norm and orthogonality enforcement.

Projections, regulariser gradients, differentiable weight normalisation, and
the iterative symmetric orthogonalisation with its eigenvalue-map facts.
"""

from dataclasses import dataclass

import numpy as np

from .validation import check_weights

DEGENERATE_NORM = 1e-12


class DegenerateColumnError(ValueError):
    """A weight column has (numerically) zero norm; the caller decides reinit."""


@dataclass
class ConstraintSpec:
    """What the training loop applies after each gradient step.

    unit_norm: none | project | regularize | weight_norm
    orthogonality: none | symmetric_reg | asymmetric_reg | iterative | gram_schmidt
    """

    unit_norm: str = "project"
    unit_strength: float = 1.0
    orthogonality: str = "none"
    alpha: float = 0.125          # symmetric regulariser gain, <= 1/8 for plain SGD at lr 1
    beta: float = 0.5             # asymmetric gain / iterative step size
    sigma_weighted: bool = False  # scale the asymmetric regulariser by the batch stds
    max_iter: int = 50
    tol: float = 1e-10

    def __post_init__(self):
        if self.unit_norm not in ("none", "project", "regularize", "weight_norm"):
            raise ValueError(f"unknown unit_norm {self.unit_norm!r}")
        if self.orthogonality not in (
            "none", "symmetric_reg", "asymmetric_reg", "iterative", "gram_schmidt"
        ):
            raise ValueError(f"unknown orthogonality {self.orthogonality!r}")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.orthogonality == "iterative" and not 0.0 < self.beta <= 0.5:
            raise ValueError("iterative beta must be in (0, 1/2]")


def column_norms(W):
    return np.linalg.norm(W, axis=0)


def project_unit_columns(W):
    """Normalise every column to unit Euclidean norm; direction unchanged."""
    W = check_weights(W)
    norms = column_norms(W)
    if np.any(norms < DEGENERATE_NORM):
        bad = np.nonzero(norms < DEGENERATE_NORM)[0]
        raise DegenerateColumnError(f"columns {bad.tolist()} have ~zero norm")
    return W / norms


def weight_norm_map(V):
    """Differentiable weight normalisation W = V / ||V|| per column.

    Returns the normalised matrix and a backmap that pushes a gradient in W
    through the per-column Jacobian (I - w w^T) / ||v||.
    """
    V = check_weights(V)
    norms = column_norms(V)
    if np.any(norms < DEGENERATE_NORM):
        raise DegenerateColumnError("zero column in weight normalisation")
    W = V / norms

    def backmap(G):
        G = np.asarray(G, dtype=np.float64)
        radial = np.sum(W * G, axis=0)
        return (G - W * radial) / norms

    return W, backmap


def unit_norm_reg_grad(W, strength=1.0):
    """Gradient of strength * sum_i (1 - ||w_i||)^2 / 2."""
    norms = column_norms(W)
    if np.any(norms < DEGENERATE_NORM):
        raise DegenerateColumnError("zero column in unit-norm regulariser")
    return strength * (1.0 - 1.0 / norms) * W


def orth_reg_grad(W, mode="symmetric", *, alpha=0.125, beta=1.0,
                  sigma_hat=None, x_batch=None):
    """Gradient of an orthogonality regulariser on W.

    symmetric:        4 * alpha * W (W^T W - I), from alpha ||I - W^T W||_F^2
    asymmetric:       Gram-Schmidt-like; column i is corrected against columns j < i
    asymmetric_sigma: as asymmetric, with the frozen stds weighting the loss
    encoder_implicit: batch mean of x^T y (W^T W - I), the encoder half of the
                      linear reconstruction loss (zero at orthonormal W)
    """
    W = check_weights(W)
    G = W.T @ W
    k = G.shape[0]
    if mode == "symmetric":
        return 4.0 * alpha * (W @ (G - np.eye(k)))
    if mode == "asymmetric":
        return beta * (W @ np.triu(G, 1))
    if mode == "asymmetric_sigma":
        if sigma_hat is None:
            raise ValueError("asymmetric_sigma needs sigma_hat")
        s2 = np.asarray(sigma_hat, dtype=np.float64) ** 2
        return beta * (W @ np.triu(s2[:, None] * G, 1))
    if mode == "encoder_implicit":
        if x_batch is None:
            raise ValueError("encoder_implicit needs x_batch")
        X = np.asarray(x_batch, dtype=np.float64)
        Y = X @ W
        return (X.T @ Y) @ (G - np.eye(k)) / X.shape[0]
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class OrthogonalizeResult:
    W: np.ndarray
    converged: bool
    iterations: int
    residual: float


def iteration_eigenvalue_map(lam, beta):
    """Eigenvalue evolution of W^T W under one step W <- (1+b) W - b W W^T W."""
    lam = np.asarray(lam, dtype=np.float64)
    return (1 + beta) ** 2 * lam - 2 * (1 + beta) * beta * lam**2 + beta**2 * lam**3


def orthogonalize(W, method="iterative", beta=0.5, max_iter=50, tol=1e-10):
    """Make the columns of W orthonormal without leaving their span.

    iterative: normalise columns, then repeat W <- (1+beta) W - beta W W^T W.
    gram_schmidt: modified Gram-Schmidt; raises on rank deficiency.
    """
    W = check_weights(W).copy()
    k = W.shape[1]
    if method == "gram_schmidt":
        for i in range(k):
            for j in range(i):
                W[:, i] -= (W[:, j] @ W[:, i]) * W[:, j]
            norm = np.linalg.norm(W[:, i])
            if norm < DEGENERATE_NORM:
                raise np.linalg.LinAlgError(f"rank deficient at column {i}")
            W[:, i] /= norm
        res = np.linalg.norm(W.T @ W - np.eye(k))
        return OrthogonalizeResult(W=W, converged=True, iterations=k, residual=res)
    if method != "iterative":
        raise ValueError(f"unknown method {method!r}")
    if not 0.0 < beta <= 0.5:
        raise ValueError("iterative beta must be in (0, 1/2]")
    W = project_unit_columns(W)
    eye = np.eye(k)
    residual = np.linalg.norm(W.T @ W - eye)
    for it in range(1, max_iter + 1):
        W = (1 + beta) * W - beta * (W @ (W.T @ W))
        residual = np.linalg.norm(W.T @ W - eye)
        if residual <= tol:
            return OrthogonalizeResult(W=W, converged=True, iterations=it, residual=residual)
    return OrthogonalizeResult(W=W, converged=False, iterations=max_iter, residual=residual)
