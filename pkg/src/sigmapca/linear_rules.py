"""Linear PCA learning rules as loss/gradient pairs over a batch.

All data losses are 0.5 * mean-over-batch of the squared residual so that the
returned gradients are exactly the classic update fields (negated).  Pure
update rules that are not gradients of a scalar loss (GHA, weighted subspace
v1/v3) report the reconstruction loss for monitoring; their stop-gradient
pseudo-losses are exercised by the gradient-check suite.
"""

from dataclasses import dataclass, field

import numpy as np

from .validation import check_data, check_rng, check_weights


@dataclass
class GradResult:
    """Loss value plus parameter gradients, stop-gradient semantics applied."""

    loss: float
    grad_w: np.ndarray
    grad_sigma: np.ndarray | None = None
    grad_mu: np.ndarray | None = None
    info: dict = field(default_factory=dict)


@dataclass
class WeightingSpec:
    """Strictly decreasing component weights in (0, 1]."""

    lambdas: np.ndarray
    source: str = "custom"

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=np.float64)
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("lambdas must be a 1-D vector")
        if np.any(lam <= 0) or np.any(lam > 1):
            raise ValueError("lambdas must lie in (0, 1]")
        if np.any(np.diff(lam) >= 0):
            raise ValueError("lambdas must be strictly decreasing")
        self.lambdas = lam

    @classmethod
    def linear_spaced(cls, k):
        return cls(np.linspace(1.0, 1.0 / k, k), source="linear_spaced")


def _prep(X, W):
    X = check_data(X)
    W = check_weights(W, p=X.shape[1])
    return X, W, X.shape[0]


def _recon_loss(R, b):
    return 0.5 * float(np.sum(R * R)) / b


def linear_pca_grad(X, W, variant="tied_full"):
    """Tied linear autoencoder gradient, or one of its two halves.

    tied_full    encoder + decoder contributions of 0.5 E||x - x W W^T||^2
    subspace     decoder only (the subspace learning rule, encoder stop-gradded)
    encoder_only encoder only, x^T y (W^T W - I); zero at orthonormal W
    """
    X, W, b = _prep(X, W)
    Y = X @ W
    R = Y @ W.T - X
    loss = _recon_loss(R, b)
    enc = X.T @ (R @ W)      # = x^T y (W^T W - I) summed
    dec = R.T @ Y            # = (W W^T - I) x^T y summed
    if variant == "tied_full":
        grad = (enc + dec) / b
    elif variant == "subspace":
        grad = dec / b
    elif variant == "encoder_only":
        grad = enc / b
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return GradResult(loss=loss, grad_w=grad)


def weighted_subspace_grad(X, W, lambdas, variant="v3"):
    """Weighted subspace rule; the per-component weights break the symmetry.

    v1: update x^T y - W y^T y L^-1         (stationary column norms sqrt(lambda_i))
    v2: update x^T y L - W y^T y            (carries its own loss)
    v3: update x^T y - W (y L^1/2)^T y L^-1/2  (unit-norm preserving)
    """
    if isinstance(lambdas, WeightingSpec):
        lam = lambdas.lambdas
    else:
        lam = WeightingSpec(lambdas).lambdas
    X, W, b = _prep(X, W)
    if lam.size != W.shape[1]:
        raise ValueError("lambdas length must equal the component count")
    Y = X @ W
    C = Y.T @ Y
    XtY = X.T @ Y
    R = Y @ W.T - X
    loss = _recon_loss(R, b)
    if variant == "v1":
        grad = (W @ (C / lam[None, :]) - XtY) / b
    elif variant == "v2":
        grad = (W @ C - XtY * lam[None, :]) / b
        loss += 0.5 * (float(np.sum(Y * Y)) - float(np.sum(Y * Y * lam[None, :]))) / b
    elif variant == "v3":
        grad = (W @ (np.sqrt(lam)[:, None] * C / np.sqrt(lam)[None, :]) - XtY) / b
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return GradResult(loss=loss, grad_w=grad)


def asymmetric_pca_loss_grad(X, W, lambdas, sigma_hat):
    """Unit-norm-preserving axis-aligning loss:

        0.5 E( ||x [W]_sg W^T - x||^2 + ||W S L^1/2||^2 - ||W S||^2
               - ||x W L^1/2||^2 + ||x W||^2 )

    with S the frozen batch stds of y.  Combines reconstruction, weighted
    regularisation, and weighted variance maximisation; stationary W^T W = I.
    """
    if isinstance(lambdas, WeightingSpec):
        lam = lambdas.lambdas
    else:
        lam = WeightingSpec(lambdas).lambdas
    X, W, b = _prep(X, W)
    s2 = np.asarray(sigma_hat, dtype=np.float64) ** 2
    Y = X @ W
    R = Y @ W.T - X
    loss = (
        _recon_loss(R, b)
        + 0.5 * float(np.sum((W * W) * (s2 * lam)[None, :]))
        - 0.5 * float(np.sum((W * W) * s2[None, :]))
        - 0.5 * float(np.sum(Y * Y * lam[None, :])) / b
        + 0.5 * float(np.sum(Y * Y)) / b
    )
    grad = (W @ (Y.T @ Y) - (X.T @ Y) * lam[None, :]) / b + W * (s2 * (lam - 1.0))[None, :]
    return GradResult(loss=loss, grad_w=grad)


def gha_grad(X, W, variant="plain"):
    """Generalised Hebbian rule and its autoencoder combinations.

    plain         x^T y - W lower(y^T y); lower keeps the diagonal
    with_encoder  plain minus the encoder term x^T y (lower(W^T W) - I)
    plus_subspace plain plus the subspace term with its diagonal removed
    recon_combo   tied reconstruction gradient + W strict_lower(y^T y)

    The reconstruction loss is returned for monitoring; these are update
    rules rather than gradients of a single scalar loss.
    """
    X, W, b = _prep(X, W)
    k = W.shape[1]
    Y = X @ W
    C = Y.T @ Y
    XtY = X.T @ Y
    R = Y @ W.T - X
    loss = _recon_loss(R, b)
    if variant == "plain":
        grad = (W @ np.tril(C) - XtY) / b
    elif variant == "with_encoder":
        grad = (W @ np.tril(C) - XtY + XtY @ (np.tril(W.T @ W) - np.eye(k))) / b
    elif variant == "plus_subspace":
        grad = (W @ np.tril(C) + W @ (C - np.diag(np.diag(C))) - XtY) / b
    elif variant == "recon_combo":
        enc = X.T @ (R @ W)
        dec = R.T @ Y
        grad = (enc + dec + W @ np.tril(C, -1)) / b
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return GradResult(loss=loss, grad_w=grad)


def sample_nested_index(k, rho, rng):
    """Draw j in 1..k from the truncated-renormalised geometric rho^(j-1)(1-rho)."""
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must be in (0, 1)")
    rng = check_rng(rng)
    z = 1.0 - rho**k
    u = rng.uniform()
    j = int(np.ceil(np.log1p(-u * z) / np.log(rho)))
    return min(max(j, 1), k)


def nested_mask(k, j):
    """Binary keep-mask over components 0..k-1: ones strictly below the cut j."""
    return (np.arange(k) < j).astype(np.float64)


def nested_dropout_grad(X, W, rho, rng):
    """Tied reconstruction gradient through a sampled nested mask on the code."""
    X, W, b = _prep(X, W)
    k = W.shape[1]
    j = sample_nested_index(k, rho, rng)
    m = nested_mask(k, j)
    Y = X @ W
    Ym = Y * m[None, :]
    R = Ym @ W.T - X
    grad = ((X.T @ (R @ W)) * m[None, :] + R.T @ Ym) / b
    return GradResult(loss=_recon_loss(R, b), grad_w=grad, info={"j": j, "mask": m})


def weighted_variance_grad(X, W, lambdas=None, alpha=-1.0, mode="fixed",
                           rho=None, rng=None):
    """Tied reconstruction combined with a weighted variance term:

        0.5 E( ||x - x W W^T||^2 - alpha ||x W L^1/2||^2 )

    Stationary point satisfies W^T W = I + (alpha/2) L.  Modes: fixed weights,
    per-sample stochastic nested masks, or weights proportional to the frozen
    component variances.
    """
    if alpha not in (-1.0, 1.0):
        raise ValueError("alpha must be -1 or +1")
    X, W, b = _prep(X, W)
    k = W.shape[1]
    Y = X @ W
    R = Y @ W.T - X
    enc = X.T @ (R @ W)
    dec = R.T @ Y
    loss = _recon_loss(R, b)
    info = {}
    if mode == "stochastic":
        if rho is None or rng is None:
            raise ValueError("stochastic mode needs rho and rng")
        rng = check_rng(rng)
        M = np.stack([nested_mask(k, sample_nested_index(k, rho, rng)) for _ in range(b)])
        grad = (enc + dec - alpha * (X.T @ (Y * M))) / b
        loss -= 0.5 * alpha * float(np.sum((Y * M) ** 2)) / b
        info["masks"] = M
    else:
        if mode == "variance_proportional":
            e2 = np.mean(Y * Y, axis=0)
            lam = e2 / max(float(np.max(e2)), 1e-30)   # stop-gradient weights
        elif mode == "fixed":
            lam = np.asarray(
                lambdas.lambdas if isinstance(lambdas, WeightingSpec) else lambdas,
                dtype=np.float64,
            )
            if np.any(lam < 0) or np.any(lam > 1):
                raise ValueError("weights must lie in [0, 1]")
        else:
            raise ValueError(f"unknown mode {mode!r}")
        grad = (enc + dec - alpha * (X.T @ Y) * lam[None, :]) / b
        loss -= 0.5 * alpha * float(np.sum(Y * Y * lam[None, :])) / b
        info["lambdas"] = lam
    return GradResult(loss=loss, grad_w=grad, info=info)
