"""Desk-scale experiment runners shared by the CLI and the acceptance suite.

Training recipes: signals and 2-D points use SGD(lr 0.01, momentum 0.9) with
batch 100 (200 and 100 epochs respectively, best-loss checkpoint); patches
use Adam(lr 1e-3) with batch 128.
"""

import numpy as np

from .datasets import (gen_bar_images, gen_mixing, gen_points_2d, gen_signals,
                       extract_patches, mix_sources)
from .estimators import PCA, LinearICA, SigmaPCA
from .metrics import (amari_index, match_components, orth_residual,
                      rotation_angle_error)

SIGNAL_PERIODS = {"sine": 151.0, "square": 67.0, "sawtooth": 43.0}


def _draw_non_orthogonal_mixing(seed, cond_max):
    """A mixing that is genuinely non-orthogonal: scale factor clearly
    anisotropic and rotation factor well away from a signed permutation."""
    for attempt in range(300):
        gtm = gen_mixing(3, 3, kind="non_orthogonal", cond_max=cond_max,
                         seed=seed + 1000 + 7919 * attempt)
        cond = gtm.Sigma0[0] / gtm.Sigma0[-1]
        if cond >= 3.0 and np.max(np.abs(gtm.V0)) <= 0.8:
            return gtm
    raise RuntimeError("could not draw a suitable non-orthogonal mixing")


def make_signal_data(mixing="orthogonal", seed=0, n=2000, stds=None,
                     noise_rel=0.05, cond_max=4.0):
    """Three mixed signals; square and sawtooth share a variance by default."""
    if stds is None:
        stds = (2.0, 1.0, 1.0) if mixing == "orthogonal" else (3.0, 2.0, 1.0)
    specs = [
        {"kind": kind, "period": SIGNAL_PERIODS[kind],
         "target_std": std, "noise_std": noise_rel * std}
        for kind, std in zip(("sine", "square", "sawtooth"), stds)
    ]
    S0 = gen_signals(n, specs, seed=seed)
    if mixing == "non_orthogonal":
        gtm = _draw_non_orthogonal_mixing(seed, cond_max)
    else:
        gtm = gen_mixing(3, 3, kind=mixing, cond_max=cond_max, seed=seed + 1000)
    X = mix_sources(S0, gtm)
    return X, gtm, np.asarray(stds, dtype=np.float64)


def _fit_method(X, k, method, seed, a, epochs, batch_size, lr, momentum,
                optimizer):
    """Fit one separation method; returns (Y, sigma_est, W_cols, B)."""
    if method == "pca":
        est = PCA(n_components=k).fit(X)
        Y = est.transform(X)
        return Y, est.stds_, est.components_.T, None, est
    if method == "nlpca":
        est = SigmaPCA(n_components=k, a=a, optimizer=optimizer, lr_=lr,
                       momentum=momentum, batch_size=batch_size, epochs=epochs,
                       seed=seed).fit(X)
        return est.transform(X), est.stds_, est.components_.T, None, est
    if method in ("fastica", "two_stage_nlpca", "two_layer", "easi"):
        est = LinearICA(n_components=k, algorithm=method, a=a, lr_=lr,
                        momentum=momentum, batch_size=batch_size,
                        epochs=epochs, seed=seed).fit(X)
        Y = est.transform(X)
        sigma_est = getattr(getattr(est, "result_", None), "sigma", None)
        W = getattr(getattr(est, "result_", None), "W", None)
        return Y, sigma_est, W, est.unmixing_, est
    raise ValueError(f"unknown method {method!r}")


def run_signals(mixing="orthogonal", method="nlpca", seed=0, a=0.8, n=2000,
                stds=None, noise_rel=0.05, cond_max=4.0, epochs=200,
                batch_size=100, lr=0.01, momentum=0.9, optimizer="sgd"):
    """Signal-separation experiment; returns (metrics dict, arrays for CSV)."""
    X, gtm, true_stds = make_signal_data(mixing, seed, n, stds, noise_rel,
                                         cond_max)
    Y, sigma_est, W, B, est = _fit_method(
        X, 3, method, seed, a, epochs, batch_size, lr, momentum, optimizer)
    report = match_components(Y, gtm.S0, mode="brute_force")
    source_stds = gtm.S0.std(axis=0)
    result = {
        "method": method,
        "mixing": mixing,
        "seed": seed,
        "perm": report.perm.tolist(),
        "signs": report.signs.tolist(),
        "corrs": report.corrs.tolist(),
        "min_corr": report.min_corr,
        "source_stds": source_stds.tolist(),
        "target_stds": true_stds.tolist(),
    }
    if sigma_est is not None:
        errs = [abs(sigma_est[i] - source_stds[report.perm[i]])
                / source_stds[report.perm[i]] for i in range(3)]
        result["sigma_est"] = np.asarray(sigma_est).tolist()
        result["var_errors"] = [float(e) for e in errs]
        result["max_var_error"] = float(max(errs))
    if W is not None:
        result["orth_residual"] = orth_residual(W)
    if B is not None:
        result["amari"] = amari_index(B, gtm.B0_inv)
    if hasattr(est, "converged_"):
        result["converged"] = bool(est.converged_)
    aligned = np.zeros_like(Y)
    for i in range(3):
        aligned[:, report.perm[i]] = report.signs[i] * Y[:, i]
    arrays = {"t": np.arange(n, dtype=np.float64), "true": gtm.S0,
              "mixed": X, "recovered": aligned}
    return result, arrays


def run_points2d(dist="uniform", theta=np.pi / 4, method="nlpca", seed=0,
                 a=0.5, n=1000, epochs=100, batch_size=100, lr=0.01,
                 momentum=0.9):
    """2-D unrotation experiment; the angle error is modulo quarter turns."""
    X, gtm = gen_points_2d(dist, n, theta, seed=seed)
    Y, sigma_est, W, B, est = _fit_method(
        X, 2, method, seed, a, epochs, batch_size, lr, momentum, "sgd")
    result = {
        "method": method, "dist": dist, "seed": seed, "theta": float(theta),
    }
    if W is not None:
        result["angle_error_deg"] = float(
            np.degrees(rotation_angle_error(W, theta)))
        result["orth_residual"] = orth_residual(W)
    report = match_components(Y, gtm.S0, mode="brute_force")
    result["corrs"] = report.corrs.tolist()
    result["min_corr"] = report.min_corr
    arrays = {"original": gtm.S0, "rotated": X, "recovered": Y}
    return result, arrays


def patch_corpus(seed=0, n_images=300, image_size=16, patch_size=8, stride=2):
    """Procedural oriented-bar patches, centred per pixel over the corpus."""
    images = gen_bar_images(n_images, image_size, seed=seed)
    P = extract_patches(images, patch_size, stride=stride)
    return P - P.mean(axis=0)


PATCH_VARIANTS = {
    "stopgrad": dict(decoder_mode="stopgrad", nonlinearity="scaled_tanh", a=4.0),
    "with_decoder": dict(decoder_mode="full", nonlinearity="scaled_tanh", a=4.0),
    "linear_symmetric": dict(decoder_mode="full", nonlinearity="linear"),
    "conventional": dict(decoder_mode="stopgrad", nonlinearity="scaled_tanh",
                         a=1.0, conventional=True),
}


def run_patches(variant="stopgrad", k=16, seed=0, epochs=15, n_images=300,
                image_size=16, patch_size=8, stride=2, lr=1e-3,
                batch_size=128):
    """Train one filter-learning variant on the bar corpus."""
    X = patch_corpus(seed=seed, n_images=n_images, image_size=image_size,
                     patch_size=patch_size, stride=stride)
    if variant == "pca":
        est = PCA(n_components=k).fit(X)
        W = est.components_.T
        sigma = est.stds_
    elif variant == "fastica":
        est = LinearICA(n_components=k, algorithm="fastica", seed=seed).fit(X)
        W = est.result_.W
        sigma = est.result_.sigma
    else:
        opts = PATCH_VARIANTS[variant]
        est = SigmaPCA(n_components=k, optimizer="adam", lr_=lr,
                       batch_size=batch_size, epochs=epochs, seed=seed,
                       mu_mode="precentred", **opts).fit(X)
        W = est.components_.T
        sigma = est.stds_
    result = {
        "variant": variant, "seed": seed, "k": k,
        "orth_residual": orth_residual(W),
        "sigma": np.asarray(sigma).tolist(),
        "sigma_descending": bool(np.all(np.diff(sigma) <= 1e-12)),
        "column_norms": np.linalg.norm(W, axis=0).tolist(),
    }
    return result, W, X
