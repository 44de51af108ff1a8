"""Linear ICA pipelines: PCA whitening, fixed-point rotation search, two-stage
and two-layer models, the EASI relative-gradient rule, and norm-based ordering."""

from dataclasses import dataclass

import numpy as np

from .constraints import orthogonalize
from .linalg import pca_fit_svd, random_semi_orthogonal
from .sigma_pca import sigma_pca_grad
from .validation import check_data, check_rng, check_weights


@dataclass
class IcaResult:
    """Overall unmixing B = W S^-1 V plus the renormalised, reordered factors."""

    B: np.ndarray          # (p, k); components of X B have unit batch variance
    W: np.ndarray          # (p, k); unit-norm columns of B, reordered
    sigma: np.ndarray      # (k,); stds estimated from the unmixing norms, descending
    V: np.ndarray          # (k, k) orthogonal rotation
    order: np.ndarray
    converged: bool
    iterations: int


@dataclass
class FastIcaResult:
    V: np.ndarray
    converged: bool
    iterations: int


def whiten_pca(X, k):
    """Project onto the top-k principal axes and scale to unit variance.

    Returns (Z, A) with Z = (X - mean) A and A = W diag(1/sigma); the batch
    covariance of Z is the identity.
    """
    X = check_data(X)
    if X.shape[0] <= k:
        raise ValueError("whitening needs more samples than components")
    basis = pca_fit_svd(X, k)
    if np.any(basis.sigma < 1e-12 * max(basis.sigma[0], 1.0)):
        raise ValueError("zero-variance component retained; reduce k")
    A = basis.W / basis.sigma
    Z = (X - basis.mean) @ A
    return Z, A


_CONTRASTS = {
    "logcosh": (np.tanh, lambda u: 1.0 - np.tanh(u) ** 2),
    "cube": (lambda u: u**3, lambda u: 3.0 * u**2),
}


def fastica(Z, contrast="logcosh", tol=1e-6, max_iter=500, seed=0):
    """Symmetric fixed-point rotation search on whitened data.

    Each round applies V <- E[z^T g(zV)] - V diag(E[g'(zV)]) followed by
    iterative symmetric decorrelation; converged when the largest column
    rotation between rounds falls below tol.
    """
    Z = check_data(Z)
    n, k = Z.shape
    if contrast not in _CONTRASTS:
        raise ValueError(f"unknown contrast {contrast!r}")
    g, gp = _CONTRASTS[contrast]
    rng = check_rng(seed)
    V = random_semi_orthogonal(k, k, rng)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        S = Z @ V
        V_new = Z.T @ g(S) / n - V * gp(S).mean(axis=0)
        V_new = orthogonalize(V_new, "iterative").W
        delta = 1.0 - float(np.min(np.abs(np.diag(V.T @ V_new))))
        V = V_new
        if delta < tol:
            converged = True
            break
    return FastIcaResult(V=V, converged=converged, iterations=it)


def order_by_unmixing_norm(B):
    """Estimate stds as the inverse column norms of the unmixing matrix.

    Returns the unit-norm columns (original order), the descending-std
    permutation, and the std estimates.
    """
    B = check_weights(B)
    norms = np.linalg.norm(B, axis=0)
    if np.any(norms < 1e-12):
        raise ValueError("zero column in unmixing matrix")
    sigma_est = 1.0 / norms
    order = np.argsort(-sigma_est, kind="stable")
    return B / norms, order, sigma_est


def _train_rotation_nlpca(Z, spec, seed, lr=0.1, steps=300):
    """Rotation via the classic nonlinear PCA rule on whitened data.

    Decoder-contribution updates with symmetric decorrelation after each step.
    """
    from .sigma_pca import nonlinearity_eval

    n, k = Z.shape
    rng = check_rng(seed)
    V = random_semi_orthogonal(k, k, rng)
    for _ in range(steps):
        S = Z @ V
        H, _ = nonlinearity_eval(spec, S)
        R = H @ V.T - Z
        V = V - lr * (R.T @ H) / n
        V = orthogonalize(V, "iterative").W
    return V


def two_stage_ica(X, k, rotation_method="fastica", contrast="logcosh",
                  nl_spec=None, tol=1e-6, max_iter=500, seed=0):
    """Whiten with PCA, then find the remaining rotation.

    The overall unmixing is B = A V.  The result also carries the
    renormalised form: columns of B scaled to unit norm and reordered by the
    estimated variances, which recovers the orthonormal factor of the mixing
    when it exists.
    """
    Z, A = whiten_pca(X, k)
    if rotation_method == "fastica":
        fr = fastica(Z, contrast=contrast, tol=tol, max_iter=max_iter, seed=seed)
        V, converged, iterations = fr.V, fr.converged, fr.iterations
    elif rotation_method == "conventional_nlpca":
        from .sigma_pca import NonlinearitySpec
        spec = nl_spec or NonlinearitySpec(kind="scaled_tanh", a=1.0)
        V = _train_rotation_nlpca(Z, spec, seed)
        converged, iterations = True, 300
    else:
        raise ValueError(f"unknown rotation_method {rotation_method!r}")
    B = A @ V
    B_unit, order, sigma_est = order_by_unmixing_norm(B)
    return IcaResult(B=B, W=B_unit[:, order], sigma=sigma_est[order], V=V,
                     order=order, converged=converged, iterations=iterations)


@dataclass
class GradPair:
    loss: float
    grad_w: np.ndarray
    grad_v: np.ndarray
    grad_sigma: np.ndarray | None = None


def two_layer_nlpca_grad(model, V, X, rotation_nl=None):
    """Gradients for the two-layer model: nonlinear PCA feeding a rotation.

    The W gradient comes from the std-modelling loss alone; the V gradient
    from reconstructing the frozen standardised code T = x [W S^-1]_sg through
    the rotation, ||T - h(T V) V^T||^2, with classic unit-variance semantics.
    """
    from .sigma_pca import nonlinearity_eval

    base = sigma_pca_grad(model, X)
    cache = base.info["cache"]
    T = cache.z  # frozen: x W S^-1 with the current statistics
    b = T.shape[0]
    spec = rotation_nl or model.nonlinearity
    Hv, _ = nonlinearity_eval(spec, T @ V)
    Rv = Hv @ V.T - T
    grad_v = (Rv.T @ Hv) / b
    loss = base.loss + 0.5 * float(np.sum(Rv * Rv)) / b
    return GradPair(loss=loss, grad_w=base.grad_w, grad_v=grad_v,
                    grad_sigma=base.grad_sigma)


def easi_step(W, Y, h=np.tanh, eta=0.01):
    """One relative-gradient separation update on a square unmixing matrix:

        W <- W - eta W ( E[y^T y] - I + E[y^T h(y)] - E[h(y)^T y] )

    The skew-symmetric part preserves orthogonality to first order in eta.
    """
    W = check_weights(W)
    if W.shape[0] != W.shape[1]:
        raise ValueError("EASI needs a square unmixing matrix")
    Y = check_data(Y, name="Y")
    b = Y.shape[0]
    C = Y.T @ Y / b
    Hy = h(Y)
    M = (Y.T @ Hy - Hy.T @ Y) / b
    return W - eta * (W @ (C - np.eye(W.shape[0]) + M))
