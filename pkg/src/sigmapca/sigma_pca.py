"""Unified single-layer autoencoder for linear and nonlinear PCA.

The model reconstructs through h(x W S^-1) S W^T where S holds the component
standard deviations.  With h linear this is exactly the tied linear
autoencoder; with a saturating h and the decoder factor stop-gradded it
resolves the rotational indeterminacy while still ordering by variance.

Gradient conventions match linear_rules: data losses are 0.5 * batch mean of
the squared residual, and statistics (means, stds) entering a loss are frozen
(stop-gradient) at their current values.
"""

import copy
from dataclasses import dataclass, field

import numpy as np

from .linalg import EPS_STD, MomentState, safe_std
from .linear_rules import GradResult
from .validation import check_data, check_rng, check_weights


@dataclass
class NonlinearitySpec:
    """Elementwise nonlinearity h and how its derivative is treated.

    kinds: scaled_tanh a*tanh(z/a) | hard_tanh clip(z, -a, a) | asym_const
    1.6*tanh(z) | asym_adaptive tanh(z)/std(tanh(z)) | linear.
    derivative_mode "identity" replaces h' by ones in every gradient.
    """

    kind: str = "scaled_tanh"
    a: float = 1.0
    derivative_mode: str = "exact"

    def __post_init__(self):
        if self.kind not in ("scaled_tanh", "hard_tanh", "asym_const",
                             "asym_adaptive", "linear"):
            raise ValueError(f"unknown nonlinearity {self.kind!r}")
        if self.kind != "linear" and self.a <= 0:
            raise ValueError("scale a must be > 0")
        if self.derivative_mode not in ("exact", "identity"):
            raise ValueError(f"unknown derivative_mode {self.derivative_mode!r}")


def nonlinearity_eval(spec, Z):
    """Return h(Z) and h'(Z) elementwise (h' all ones in identity mode)."""
    Z = np.asarray(Z, dtype=np.float64)
    if spec.kind == "scaled_tanh":
        H = spec.a * np.tanh(Z / spec.a)
        Hp = 1.0 - (H / spec.a) ** 2
    elif spec.kind == "hard_tanh":
        H = np.clip(Z, -spec.a, spec.a)
        Hp = (np.abs(Z) < spec.a).astype(np.float64)  # 0 at the kinks
    elif spec.kind == "asym_const":
        t = np.tanh(Z)
        H = 1.6 * t
        Hp = 1.6 * (1.0 - t * t)
    elif spec.kind == "asym_adaptive":
        t = np.tanh(Z)
        s = safe_std(t.var(axis=0))  # per-batch, per-component, stop-gradient
        H = t / s
        Hp = (1.0 - t * t) / s
    else:  # linear
        H = Z.copy()
        Hp = np.ones_like(Z)
    if spec.derivative_mode == "identity":
        Hp = np.ones_like(Z)
    return H, Hp


@dataclass
class SigmaPcaModel:
    """Weights, standard deviations, mean, and the behavioural switches."""

    W: np.ndarray
    sigma: np.ndarray
    mean: np.ndarray
    nonlinearity: NonlinearitySpec = field(default_factory=NonlinearitySpec)
    sigma_mode: str = "batch"        # batch | ema | trainable
    mu_mode: str = "batch"           # precentred | batch | ema
    decoder_mode: str = "stopgrad"   # stopgrad | full | rescaled | sigma_dropped
    rescale_norm: str = "spectral"   # spectral | frobenius | nuclear
    ordering: str = "none"           # none | projective_deflation | triangular
    #                                # | weighted_latent | nested
    ordering_variant: int = 4        # triangular term choice, 1..6
    ordering_lambdas: np.ndarray | None = None
    ordering_rho: float = 0.9
    conventional: bool = False       # plain h(x W) W^T loss, no std modelling
    l2_sigma: float = 1e-3
    eps: float = EPS_STD
    sigma_state: MomentState | None = None
    mu_state: MomentState | None = None
    floored: np.ndarray | None = None

    def __post_init__(self):
        self.W = check_weights(self.W)
        self.sigma = np.asarray(self.sigma, dtype=np.float64).copy()
        self.mean = np.asarray(self.mean, dtype=np.float64).copy()
        if self.sigma_mode not in ("batch", "ema", "trainable"):
            raise ValueError(f"unknown sigma_mode {self.sigma_mode!r}")
        if self.mu_mode not in ("precentred", "batch", "ema"):
            raise ValueError(f"unknown mu_mode {self.mu_mode!r}")
        if self.decoder_mode not in ("stopgrad", "full", "rescaled", "sigma_dropped"):
            raise ValueError(f"unknown decoder_mode {self.decoder_mode!r}")
        if self.ordering not in ("none", "projective_deflation", "triangular",
                                 "weighted_latent", "nested"):
            raise ValueError(f"unknown ordering {self.ordering!r}")
        if self.ordering == "triangular" and not 1 <= self.ordering_variant <= 6:
            raise ValueError("triangular ordering_variant must be 1..6")

    @property
    def n_components(self):
        return self.W.shape[1]

    def copy(self):
        return copy.deepcopy(self)


@dataclass
class ForwardCache:
    """Intermediate quantities of one forward pass."""

    y: np.ndarray        # latent fed to the standardisation (post-deflation)
    y_pre: np.ndarray    # (x - mu) W
    z: np.ndarray        # y / sigma
    hz: np.ndarray       # h(z)
    hprime: np.ndarray   # h'(z)
    xhat: np.ndarray     # reconstruction incl. mean
    xhat_c: np.ndarray   # centred reconstruction
    yhat: np.ndarray     # xhat_c W
    sigma: np.ndarray    # stds actually used (floored)
    mu: np.ndarray
    xc: np.ndarray
    p_mat: np.ndarray | None = None  # deflation projection, when active
    floored: np.ndarray | None = None


def _deflation_matrix(W):
    G = W.T @ W
    return np.eye(G.shape[0]) - np.tril(G, -1)


def update_statistics(model, X):
    """Refresh mean and sigma from a batch per the model's modes (stop-gradient)."""
    X = check_data(X)
    p, k = model.W.shape
    if model.mu_mode == "batch":
        model.mean = X.mean(axis=0)
    elif model.mu_mode == "ema":
        if model.mu_state is None:
            model.mu_state = MomentState(np.zeros(p), np.ones(p))
        mu, _ = (X.mean(axis=0), None)
        model.mu_state.mu_hat = (model.mu_state.alpha * model.mu_state.mu_hat
                                 + (1 - model.mu_state.alpha) * mu)
        model.mean = model.mu_state.mu_hat.copy()
    Y = (X - model.mean) @ model.W
    if model.ordering == "projective_deflation":
        Y = Y @ _deflation_matrix(model.W)
    var = Y.var(axis=0)
    if model.sigma_mode == "batch":
        model.sigma = safe_std(var, model.eps)
        model.floored = var <= model.eps**2
    elif model.sigma_mode == "ema":
        if model.sigma_state is None:
            model.sigma_state = MomentState(np.zeros(k), np.ones(k))
        st = model.sigma_state
        st.mu_hat = st.alpha * st.mu_hat + (1 - st.alpha) * Y.mean(axis=0)
        st.var_hat = st.alpha * st.var_hat + (1 - st.alpha) * var
        model.sigma = safe_std(st.var_hat, model.eps)
        model.floored = st.var_hat <= model.eps**2
    else:  # trainable: keep current values, floor for inversion safety
        model.sigma = np.maximum(model.sigma, model.eps)
    return model


def sigma_pca_forward(model, X):
    """Forward pass using the model's current statistics."""
    X = check_data(X)
    Xc = X - model.mean
    Y_pre = Xc @ model.W
    p_mat = None
    if model.ordering == "projective_deflation":
        p_mat = _deflation_matrix(model.W)
        Y = Y_pre @ p_mat
    else:
        Y = Y_pre
    sigma = np.ones(model.n_components) if model.conventional \
        else np.maximum(model.sigma, model.eps)
    Z = Y / sigma
    H, Hp = nonlinearity_eval(model.nonlinearity, Z)
    Xhat_c = (H * sigma) @ model.W.T
    return ForwardCache(
        y=Y, y_pre=Y_pre, z=Z, hz=H, hprime=Hp,
        xhat=Xhat_c + model.mean, xhat_c=Xhat_c, yhat=Xhat_c @ model.W,
        sigma=sigma, mu=model.mean.copy(), xc=Xc, p_mat=p_mat,
        floored=model.floored,
    )


_TRIANGULAR_ARGS = {
    1: lambda c: (c.hz * c.sigma).T @ c.hz,
    2: lambda c: c.hz.T @ (c.hz * c.sigma),
    3: lambda c: c.hz.T @ c.y,
    4: lambda c: c.y.T @ c.hz,
    5: lambda c: c.z.T @ c.y,
    6: lambda c: c.y.T @ c.z,
}


def ordering_term_grad(model, cache, variant=None):
    """Gradient contribution that induces an index-position ordering.

    triangular: GHA-like addition W upper(arg) with arg chosen by
    ordering_variant; projective_deflation: the asymmetric term
    -W strict_upper(y_delta^T y) that the deflated encoder produces.
    """
    variant = variant or model.ordering
    b = cache.y.shape[0]
    W = model.W
    if variant == "triangular":
        arg = _TRIANGULAR_ARGS[model.ordering_variant](cache)
        return W @ np.triu(arg) / b
    if variant == "projective_deflation":
        ydelta = (cache.yhat - cache.y_pre) * cache.hprime
        return -(W @ np.triu(ydelta.T @ cache.y_pre, 1)) / b
    raise ValueError(f"no standalone ordering term for {variant!r}")


def sigma_pca_grad(model, X, rng=None):
    """Loss and W-gradient (plus sigma-gradient when trainable).

    decoder_mode picks which contributions enter the W update: the encoder
    path alone (stopgrad), both (full), both with the decoder scaled down by
    1/||sigma|| (rescaled), or the decoder with its std factor dropped
    (sigma_dropped).  conventional=True computes the classic
    ||x - h(x W) W^T||^2 rule (decoder contribution only, no stds).
    """
    cache = sigma_pca_forward(model, X)
    Xc = cache.xc
    b = Xc.shape[0]
    W = model.W
    R = cache.xhat_c - Xc
    recon = 0.5 * float(np.sum(R * R)) / b

    if model.conventional:
        grad = (R.T @ cache.hz) / b
        return GradResult(loss=recon, grad_w=grad, info={"cache": cache})

    ydelta = (cache.yhat - cache.y_pre) * cache.hprime

    if model.ordering == "weighted_latent":
        lam = np.asarray(model.ordering_lambdas, dtype=np.float64)
        K = W.T @ W  # frozen copy
        Rwl = cache.y * lam - (cache.hz * (cache.sigma * lam)) @ K
        grad = -(Xc.T @ ((Rwl @ K.T) * lam * cache.hprime)) / b
        loss = 0.5 * float(np.sum(Rwl * Rwl)) / b
        return GradResult(loss=loss, grad_w=grad, info={"cache": cache, "recon": recon})

    if model.ordering == "nested":
        rng = check_rng(rng)
        from .linear_rules import nested_mask, sample_nested_index
        k = model.n_components
        j = sample_nested_index(k, model.ordering_rho, rng)
        m = nested_mask(k, j)
        Xhat_m = (cache.hz * m * cache.sigma) @ W.T
        Rm = Xhat_m - Xc
        enc = Xc.T @ (((Rm @ W) * m) * cache.hprime) / b
        G = W.T @ W - np.eye(k)
        grad = enc + 4.0 * (W @ G)
        loss = 0.5 * float(np.sum(Rm * Rm)) / b + float(np.sum(G * G))
        return GradResult(loss=loss, grad_w=grad,
                          info={"cache": cache, "j": j, "mask": m})

    if model.ordering == "projective_deflation":
        enc = (Xc.T @ ydelta) @ cache.p_mat.T / b \
            - (W @ np.triu(ydelta.T @ cache.y_pre, 1)) / b
    else:
        enc = (Xc.T @ ydelta) / b
        if model.ordering == "triangular":
            enc = enc + ordering_term_grad(model, cache, "triangular")

    loss = recon
    if model.decoder_mode == "stopgrad":
        grad = enc
    elif model.decoder_mode == "full":
        grad = enc + (R.T @ (cache.hz * cache.sigma)) / b
    elif model.decoder_mode == "rescaled":
        if model.rescale_norm == "spectral":
            nrm = float(np.max(cache.sigma))
        elif model.rescale_norm == "frobenius":
            nrm = float(np.linalg.norm(cache.sigma))
        elif model.rescale_norm == "nuclear":
            nrm = float(np.sum(cache.sigma))
        else:
            raise ValueError(f"unknown rescale_norm {model.rescale_norm!r}")
        grad = enc + (R.T @ (cache.hz * cache.sigma)) / (b * nrm)
        loss = recon * (1.0 + 1.0 / nrm)
    else:  # sigma_dropped
        grad = enc + (R.T @ cache.hz) / b

    grad_sigma = None
    if model.sigma_mode == "trainable":
        grad_sigma = trainable_sigma_grad(cache, model.sigma, model.l2_sigma)
    return GradResult(loss=loss, grad_w=grad, grad_sigma=grad_sigma,
                      info={"cache": cache})


def trainable_sigma_grad(cache, sigma, l2=0.0):
    """Closed-form d loss / d sigma for a trainable std vector.

    Per component: (yhat - y)(h(z) - h'(z) z) averaged over the batch, plus
    the 2*l2*sigma pull of an optional L2 penalty.  Without the penalty sigma
    keeps growing as long as any reconstruction difference remains.
    """
    D = cache.yhat - cache.y
    term = D * (cache.hz - cache.hprime * cache.z)
    return term.mean(axis=0) + 2.0 * l2 * np.asarray(sigma, dtype=np.float64)


def latent_recon_grad(model, X, variant="wtw_symreg", beta=1.0):
    """Latent-space reconstruction ||x [W]_sg - h(x W / s) s K||^2 variants.

    K is the frozen W^T W (wtw_symreg), its lower triangle (tri_wtw_symreg),
    or I (plain_orthreg, plus_linear).  The first three add the symmetric
    orthogonality regulariser beta ||I - W^T W||_F^2; plus_linear instead adds
    the linear encoder reconstruction to hold W orthogonal.
    """
    cache = sigma_pca_forward(model, X)
    Xc, W = cache.xc, model.W
    b = Xc.shape[0]
    k = model.n_components
    if variant in ("wtw_symreg", "tri_wtw_symreg"):
        K = W.T @ W
        if variant == "tri_wtw_symreg":
            K = np.tril(K)
    elif variant in ("plain_orthreg", "plus_linear"):
        K = np.eye(k)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    R = (cache.hz * cache.sigma) @ K - cache.y
    grad = (Xc.T @ ((R @ K.T) * cache.hprime)) / b
    loss = 0.5 * float(np.sum(R * R)) / b
    if variant == "plus_linear":
        Rl = cache.y @ W.T - Xc
        grad = grad + (Xc.T @ (Rl @ W)) / b
        loss += 0.5 * float(np.sum(Rl * Rl)) / b
    else:
        G = W.T @ W - np.eye(k)
        grad = grad + 4.0 * beta * (W @ G)
        loss += beta * float(np.sum(G * G))
    return GradResult(loss=loss, grad_w=grad, info={"cache": cache})


def rica_grad(X, W, beta0=0.5, penalty="l1"):
    """Subspace reconstruction plus a sparsity penalty on the code.

    The penalty gain is beta0 * E||x||_2, which makes the learned filters
    invariant to the scale of the input; beta0 is reasonable in (0, 1].
    """
    if not 0.0 < beta0 <= 1.0:
        raise ValueError("beta0 must be in (0, 1]")
    X = check_data(X)
    W = check_weights(W, p=X.shape[1])
    b = X.shape[0]
    beta = beta0 * float(np.mean(np.linalg.norm(X, axis=1)))
    Y = X @ W
    R = Y @ W.T - X
    if penalty == "l1":
        g = np.sign(Y)
        pen = float(np.sum(np.abs(Y)))
    elif penalty == "logcosh":
        g = np.tanh(Y)
        pen = float(np.sum(np.logaddexp(Y, -Y) - np.log(2.0)))  # log cosh
    else:
        raise ValueError(f"unknown penalty {penalty!r}")
    grad = (R.T @ Y + beta * (X.T @ g)) / b
    loss = 0.5 * float(np.sum(R * R)) / b + beta * pen / b
    return GradResult(loss=loss, grad_w=grad, info={"beta": beta})


def _resolve_h(h):
    if callable(h):
        return h
    if h == "tanh":
        return np.tanh
    if h == "sign":
        return np.sign
    raise ValueError(f"unknown nonlinearity {h!r}")


def skew_symmetric_grad(X, W, h="tanh", beta_mode="const", beta=1.0,
                        form="dediag", sigma_hat=None):
    """Subspace rule plus a decorrelating nonlinear term.

    dediag removes the diagonal of y^T h(y) so unit norms survive; skew uses
    the fully skew-symmetric y^T h(y) - h(y)^T y.  beta_mode const uses the
    given gain, input_norm uses E||x||_2, and sigma_comp feeds h the
    standardised code and rescales by the batch stds (gain 1).
    """
    X = check_data(X)
    W = check_weights(W, p=X.shape[1])
    b = X.shape[0]
    hf = _resolve_h(h)
    Y = X @ W
    if beta_mode == "sigma_comp":
        s = np.asarray(sigma_hat, np.float64) if sigma_hat is not None \
            else safe_std(Y.var(axis=0))
        Hy = hf(Y / s)
        beta_eff = 1.0
        scale = s
    else:
        Hy = hf(Y)
        beta_eff = beta if beta_mode == "const" \
            else float(np.mean(np.linalg.norm(X, axis=1)))
        scale = np.ones(W.shape[1])
    C = Y.T @ Hy
    if form == "dediag":
        M = (C - np.diag(np.diag(C))) * scale
    elif form == "skew":
        M = (C - Hy.T @ Y) * scale
    else:
        raise ValueError(f"unknown form {form!r}")
    R = Y @ W.T - X
    grad = (W @ (Y.T @ Y) - X.T @ Y) / b + beta_eff * (W @ M) / b
    loss = 0.5 * float(np.sum(R * R)) / b \
        + beta_eff * float(np.sum(W * (W @ M))) / b
    return GradResult(loss=loss, grad_w=grad, info={"beta": beta_eff, "M": M})


def noncentred_grad(model, X, variant="wrap"):
    """Nonlinear PCA on uncentred data.

    wrap standardises the code with the batch mean/std and adds the mean back
    after the nonlinearity; bound optimises the centred loss plus a mean
    reconstruction term ||mu_x - mu_x W W^T||^2.
    """
    if model.mu_mode == "precentred":
        raise ValueError("noncentred_grad needs mu_mode batch or ema")
    X = check_data(X)
    W = model.W
    b = X.shape[0]
    if variant == "wrap":
        Yr = X @ W
        mu_y = Yr.mean(axis=0)
        s = safe_std(Yr.var(axis=0), model.eps)
        Z = (Yr - mu_y) / s
        H, Hp = nonlinearity_eval(model.nonlinearity, Z)
        R = (H * s + mu_y) @ W.T - X
        grad = (X.T @ ((R @ W) * Hp)) / b
        return GradResult(loss=0.5 * float(np.sum(R * R)) / b, grad_w=grad)
    if variant == "bound":
        mu_x = X.mean(axis=0)
        work = model.copy()
        work.mu_mode = "batch"
        work.sigma_mode = "batch"
        update_statistics(work, X)
        base = sigma_pca_grad(work, X)
        Mu = mu_x[None, :]
        Rm = (Mu @ W) @ W.T - Mu
        enc = Mu.T @ ((Rm @ W))
        dec = Rm.T @ (Mu @ W)
        grad = base.grad_w + enc + dec
        loss = base.loss + 0.5 * float(np.sum(Rm * Rm))
        return GradResult(loss=loss, grad_w=grad)
    raise ValueError(f"unknown variant {variant!r}")


def sort_components(model):
    """Reorder columns so sigma is descending; stable under ties."""
    perm = np.argsort(-model.sigma, kind="stable")
    out = model.copy()
    out.W = model.W[:, perm]
    out.sigma = model.sigma[perm]
    if out.sigma_state is not None:
        out.sigma_state.mu_hat = out.sigma_state.mu_hat[perm]
        out.sigma_state.var_hat = out.sigma_state.var_hat[perm]
    if out.floored is not None:
        out.floored = out.floored[perm]
    return out, perm
