"""Scikit-learn style estimators wrapping the functional core.

All estimators follow the fit/transform/get_params protocol so they compose
with pipelines and model selection from the wider ecosystem.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from . import linear_rules as lr
from .constraints import ConstraintSpec
from .ica import easi_step, two_stage_ica
from .linalg import pca_fit_svd, random_semi_orthogonal, safe_std
from .optim import TrainConfig, train
from .sigma_pca import (NonlinearitySpec, SigmaPcaModel, sigma_pca_forward,
                        sigma_pca_grad, sort_components, update_statistics)
from .validation import check_data, check_rank


class PCA(BaseEstimator, TransformerMixin):
    """Exact PCA via the SVD of the centred data matrix."""

    def __init__(self, n_components=None, whiten=False):
        self.n_components = n_components
        self.whiten = whiten

    def fit(self, X, y=None):
        X = check_data(X, min_samples=2)
        k = self.n_components or min(X.shape)
        basis = pca_fit_svd(X, check_rank(k, X.shape[1], "n_components"))
        self.mean_ = basis.mean
        self.components_ = basis.W.T
        self.stds_ = basis.sigma
        self.n_components_ = k
        return self

    def transform(self, X):
        X = check_data(X)
        Y = (X - self.mean_) @ self.components_.T
        if self.whiten:
            Y = Y / safe_std(self.stds_**2)
        return Y

    def inverse_transform(self, Y):
        Y = check_data(Y, name="Y")
        if self.whiten:
            Y = Y * self.stds_
        return Y @ self.components_ + self.mean_


_LINEAR_VARIANTS = (
    "tied", "subspace", "encoder_only",
    "weighted_v1", "weighted_v2", "weighted_v3", "asymmetric",
    "gha", "gha_encoder", "gha_subspace", "gha_recon",
    "nested_dropout", "weighted_variance",
)


class GradientPCA(BaseEstimator, TransformerMixin):
    """Linear PCA learned by gradient descent with a chosen update rule.

    The symmetry-breaking variants (weighted subspace, the asymmetric loss,
    the Hebbian family, nested dropout, weighted variance) converge to the
    axis-aligned principal directions; plain tied/subspace only recover the
    subspace projector.
    """

    def __init__(self, n_components=2, variant="asymmetric", lambdas=None,
                 rho=0.9, var_alpha=-1.0, var_mode="fixed",
                 optimizer="sgd", lr_=0.01, momentum=0.9, batch_size=100,
                 epochs=50, seed=0, unit_norm="none", orthogonality="none",
                 checkpoint="best_loss"):
        self.n_components = n_components
        self.variant = variant
        self.lambdas = lambdas
        self.rho = rho
        self.var_alpha = var_alpha
        self.var_mode = var_mode
        self.optimizer = optimizer
        self.lr_ = lr_
        self.momentum = momentum
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.unit_norm = unit_norm
        self.orthogonality = orthogonality
        self.checkpoint = checkpoint

    def _lambdas(self):
        if self.lambdas is not None:
            return np.asarray(self.lambdas, dtype=np.float64)
        return lr.WeightingSpec.linear_spaced(self.n_components).lambdas

    def _grad_fn(self):
        variant = self.variant
        lam = self._lambdas() if variant.startswith("weighted") \
            or variant in ("asymmetric",) else None

        def fn(params, batch, rng):
            W = params["W"]
            if variant in ("tied", "subspace", "encoder_only"):
                name = "tied_full" if variant == "tied" else variant
                res = lr.linear_pca_grad(batch, W, name)
            elif variant in ("weighted_v1", "weighted_v2", "weighted_v3"):
                res = lr.weighted_subspace_grad(batch, W, lam, variant[-2:])
            elif variant == "asymmetric":
                sig = np.sqrt(np.mean((batch @ W) ** 2, axis=0))
                res = lr.asymmetric_pca_loss_grad(batch, W, lam, sig)
            elif variant in ("gha", "gha_encoder", "gha_subspace", "gha_recon"):
                name = {"gha": "plain", "gha_encoder": "with_encoder",
                        "gha_subspace": "plus_subspace",
                        "gha_recon": "recon_combo"}[variant]
                res = lr.gha_grad(batch, W, name)
            elif variant == "nested_dropout":
                res = lr.nested_dropout_grad(batch, W, self.rho, rng)
            elif variant == "weighted_variance":
                res = lr.weighted_variance_grad(
                    batch, W, lambdas=self._lambdas(), alpha=self.var_alpha,
                    mode=self.var_mode, rho=self.rho, rng=rng)
            else:
                raise ValueError(f"unknown variant {variant!r}")
            return res.loss, {"W": res.grad_w}

        return fn

    def fit(self, X, y=None):
        if self.variant not in _LINEAR_VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        X = check_data(X, min_samples=2)
        k = check_rank(self.n_components, X.shape[1], "n_components")
        self.mean_ = X.mean(axis=0)
        Xc = X - self.mean_
        W0 = random_semi_orthogonal(X.shape[1], k, self.seed)
        config = TrainConfig(
            optimizer=self.optimizer, lr=self.lr_, momentum=self.momentum,
            batch_size=self.batch_size, epochs=self.epochs, seed=self.seed,
            constraints=ConstraintSpec(unit_norm=self.unit_norm,
                                       orthogonality=self.orthogonality),
            checkpoint=self.checkpoint,
        )
        params, history = train(self._grad_fn(), {"W": W0}, Xc, config)
        self.components_ = params["W"].T
        self.stds_ = (Xc @ params["W"]).std(axis=0)
        self.history_ = history
        self.n_components_ = k
        return self

    def transform(self, X):
        return (check_data(X) - self.mean_) @ self.components_.T

    def inverse_transform(self, Y):
        return check_data(Y, name="Y") @ self.components_ + self.mean_


class SigmaPCA(BaseEstimator, TransformerMixin):
    """Nonlinear PCA with explicit component standard deviations.

    Learns a semi-orthogonal W applied directly to the data (no whitening),
    with the code standardised before the nonlinearity and the stds either
    estimated per batch, tracked by EMA, or trained.  Defaults follow the
    signal-separation recipe; for image patches use optimizer="adam",
    lr_=1e-3, batch_size=128 and a=4.
    """

    def __init__(self, n_components=2, a=4.0, nonlinearity="scaled_tanh",
                 derivative_mode="exact", sigma_mode="batch", mu_mode="batch",
                 decoder_mode="stopgrad", rescale_norm="spectral",
                 ordering="none", ordering_variant=4, ordering_rho=0.9,
                 conventional=False, l2_sigma=1e-3, ema_alpha=0.9,
                 optimizer="sgd", lr_=0.01, momentum=0.9, batch_size=100,
                 epochs=200, seed=0, unit_norm="project", orthogonality="none",
                 checkpoint="best_loss", sort_by_std=True):
        self.n_components = n_components
        self.a = a
        self.nonlinearity = nonlinearity
        self.derivative_mode = derivative_mode
        self.sigma_mode = sigma_mode
        self.mu_mode = mu_mode
        self.decoder_mode = decoder_mode
        self.rescale_norm = rescale_norm
        self.ordering = ordering
        self.ordering_variant = ordering_variant
        self.ordering_rho = ordering_rho
        self.conventional = conventional
        self.l2_sigma = l2_sigma
        self.ema_alpha = ema_alpha
        self.optimizer = optimizer
        self.lr_ = lr_
        self.momentum = momentum
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed
        self.unit_norm = unit_norm
        self.orthogonality = orthogonality
        self.checkpoint = checkpoint
        self.sort_by_std = sort_by_std

    def _build_model(self, p, k):
        spec = NonlinearitySpec(kind=self.nonlinearity, a=self.a,
                                derivative_mode=self.derivative_mode)
        lam = lr.WeightingSpec.linear_spaced(k).lambdas \
            if self.ordering == "weighted_latent" else None
        model = SigmaPcaModel(
            W=random_semi_orthogonal(p, k, self.seed),
            sigma=np.ones(k), mean=np.zeros(p), nonlinearity=spec,
            sigma_mode=self.sigma_mode, mu_mode=self.mu_mode,
            decoder_mode=self.decoder_mode, rescale_norm=self.rescale_norm,
            ordering=self.ordering, ordering_variant=self.ordering_variant,
            ordering_lambdas=lam, ordering_rho=self.ordering_rho,
            conventional=self.conventional, l2_sigma=self.l2_sigma,
        )
        if model.sigma_state is not None:
            model.sigma_state.alpha = self.ema_alpha
        return model

    def fit(self, X, y=None):
        X = check_data(X, min_samples=2)
        p = X.shape[1]
        k = check_rank(self.n_components, p, "n_components")
        model = self._build_model(p, k)
        params = {"W": model.W}
        if self.sigma_mode == "trainable":
            update_statistics(model, X)  # start sigma at the data estimate
            params["sigma"] = model.sigma.copy()

        def grad_fn(ps, batch, rng):
            model.W = ps["W"]
            if self.sigma_mode == "trainable":
                model.sigma = ps["sigma"]
            update_statistics(model, batch)
            res = sigma_pca_grad(model, batch, rng)
            grads = {"W": res.grad_w}
            if res.grad_sigma is not None:
                grads["sigma"] = res.grad_sigma
            return res.loss, grads

        config = TrainConfig(
            optimizer=self.optimizer, lr=self.lr_, momentum=self.momentum,
            batch_size=self.batch_size, epochs=self.epochs, seed=self.seed,
            constraints=ConstraintSpec(unit_norm=self.unit_norm,
                                       orthogonality=self.orthogonality),
            checkpoint=self.checkpoint,
        )
        params, history = train(grad_fn, params, X, config)
        model.W = params["W"]
        if self.sigma_mode == "trainable":
            model.sigma = params["sigma"]
        update_statistics(model, X)  # final statistics from the full data
        perm = np.arange(k)
        if self.sort_by_std and self.ordering == "none":
            model, perm = sort_components(model)
        self.model_ = model
        self.components_ = model.W.T
        self.stds_ = model.sigma.copy()
        self.mean_ = model.mean.copy()
        self.history_ = history
        self.permutation_ = perm
        self.n_components_ = k
        return self

    def transform(self, X):
        return (check_data(X) - self.mean_) @ self.components_.T

    def inverse_transform(self, Y):
        from .sigma_pca import nonlinearity_eval
        Y = check_data(Y, name="Y")
        H, _ = nonlinearity_eval(self.model_.nonlinearity, Y / self.stds_)
        return (H * self.stds_) @ self.components_ + self.mean_

    def reconstruct(self, X):
        """Full forward pass through the fitted model."""
        return sigma_pca_forward(self.model_, check_data(X)).xhat


class LinearICA(BaseEstimator, TransformerMixin):
    """Linear ICA through one of four routes.

    fastica: PCA whitening plus the fixed-point rotation search.
    two_stage_nlpca: whitening plus a rotation from classic nonlinear PCA.
    two_layer: jointly trained std-modelling first layer and rotation layer.
    easi: relative-gradient separation on the (projected) data.
    """

    def __init__(self, n_components=2, algorithm="fastica", contrast="logcosh",
                 a=1.0, tol=1e-6, max_iter=500, lr_=0.01, momentum=0.9,
                 batch_size=100, epochs=200, eta=0.02, seed=0):
        self.n_components = n_components
        self.algorithm = algorithm
        self.contrast = contrast
        self.a = a
        self.tol = tol
        self.max_iter = max_iter
        self.lr_ = lr_
        self.momentum = momentum
        self.batch_size = batch_size
        self.epochs = epochs
        self.eta = eta
        self.seed = seed

    def _fit_two_layer(self, X, k):
        """Two single-layer autoencoders trained in sequence.

        The first layer is the linear member of the model family with the
        unit-norm-preserving axis-aligning loss, so W lands on the ordered
        eigenbasis and W diag(1/sigma) whitens; the second layer learns the
        residual rotation with the classic unit-variance nonlinear rule.
        Training the layers jointly is gradient-equivalent (each term of the
        combined loss touches one layer) but far less stable, since the
        rotation would chase a moving standardised code.
        """
        from .ica import _train_rotation_nlpca

        lin = GradientPCA(n_components=k, variant="asymmetric",
                          optimizer="sgd", lr_=self.lr_,
                          momentum=self.momentum, batch_size=self.batch_size,
                          epochs=self.epochs, seed=self.seed).fit(X)
        W = lin.components_.T
        W = W / np.linalg.norm(W, axis=0)
        Xc = X - self.mean_
        sigma = safe_std((Xc @ W).var(axis=0))
        order = np.argsort(-sigma, kind="stable")
        W, sigma = W[:, order], sigma[order]
        V = _train_rotation_nlpca(
            (Xc @ W) / sigma, NonlinearitySpec(kind="scaled_tanh", a=self.a),
            self.seed + 1)
        self.history_ = lin.history_
        self.rotation_ = V
        self.first_layer_stds_ = sigma
        return (W / sigma) @ V

    def _fit_easi(self, X, k):
        basis = pca_fit_svd(X, k)
        Xp = (X - basis.mean) @ basis.W  # rotation only; EASI self-whitens
        rng = np.random.default_rng(self.seed)
        W = np.eye(k)
        n = Xp.shape[0]
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                batch = Xp[order[start:start + self.batch_size]]
                W = easi_step(W, batch @ W, np.tanh, self.eta)
        self.rotation_ = W
        return basis.W @ W

    def fit(self, X, y=None):
        X = check_data(X, min_samples=2)
        k = check_rank(self.n_components, X.shape[1], "n_components")
        self.mean_ = X.mean(axis=0)
        if self.algorithm in ("fastica", "two_stage_nlpca"):
            method = "fastica" if self.algorithm == "fastica" else "conventional_nlpca"
            res = two_stage_ica(
                X, k, rotation_method=method, contrast=self.contrast,
                nl_spec=NonlinearitySpec(kind="scaled_tanh", a=self.a),
                tol=self.tol, max_iter=self.max_iter, seed=self.seed)
            self.result_ = res
            self.unmixing_ = res.B
            self.converged_ = res.converged
        elif self.algorithm == "two_layer":
            self.unmixing_ = self._fit_two_layer(X, k)
            self.converged_ = True
        elif self.algorithm == "easi":
            self.unmixing_ = self._fit_easi(X, k)
            self.converged_ = True
        else:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        self.n_components_ = k
        return self

    def transform(self, X):
        return (check_data(X) - self.mean_) @ self.unmixing_
