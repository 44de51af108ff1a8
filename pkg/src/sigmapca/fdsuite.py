"""Finite-difference verification of every loss/gradient op.

For each op the suite builds random instances, writes the op's stated loss
out by hand with the stop-gradient factors and estimated statistics frozen,
and compares the analytic gradient against central differences.  Update rules
that are not gradients of a scalar objective (the Hebbian family, weighted
subspace v1/v3, the skew updates, EASI, triangular ordering additions,
the dropped-std decoder) are expressed through their stop-gradient
pseudo-losses, whose frozen linear terms are rebuilt here from the formulas.
"""

from dataclasses import dataclass

import numpy as np

from . import linear_rules as lrl
from .ica import easi_step, two_layer_nlpca_grad
from .linalg import safe_std
from .optim import grad_check
from .sigma_pca import (NonlinearitySpec, SigmaPcaModel, latent_recon_grad,
                        noncentred_grad, nonlinearity_eval, rica_grad,
                        sigma_pca_grad, skew_symmetric_grad,
                        trainable_sigma_grad, update_statistics)
from .validation import check_rng


@dataclass
class FdCase:
    name: str
    instance: int
    max_rel_err: float
    passed: bool


def _instance(rng, b=8, p=5, k=3):
    X = rng.standard_normal((b, p)) * rng.uniform(0.5, 2.0)
    W = rng.standard_normal((p, k)) * 0.6
    return X, W


def _sq(R):
    return float(np.sum(R * R))


def _linear_term(W, M):
    """Value of the frozen linear pseudo-loss term tr(W^T M)."""
    return float(np.sum(W * M))


def _linear_cases(rng, out, h, tol):
    """linear-pca-methods ops."""
    for inst in range(5):
        X, W = _instance(rng)
        b = X.shape[0]
        k = W.shape[1]
        lam = np.sort(rng.uniform(0.15, 1.0, size=k))[::-1]
        lam[0] = 1.0
        Y0 = X @ W
        C0 = Y0.T @ Y0
        sig0 = np.sqrt(np.mean(Y0**2, axis=0))

        def loss_tied(ps):
            R = X @ ps["W"] @ ps["W"].T - X
            return 0.5 * _sq(R) / b

        def loss_subspace(ps):
            return 0.5 * _sq(Y0 @ ps["W"].T - X) / b

        def loss_encoder(ps):
            return 0.5 * _sq(X @ ps["W"] @ W.T - X) / b

        def loss_v2(ps):
            Y = X @ ps["W"]
            return (0.5 * _sq(Y0 @ ps["W"].T - X)
                    - 0.5 * _sq(Y * np.sqrt(lam)) + 0.5 * _sq(Y)) / b

        M_v1 = W @ (C0 * (1.0 / lam - 1.0)[None, :])
        M_v3 = W @ (np.sqrt(lam)[:, None] * C0 / np.sqrt(lam)[None, :] - C0)

        def loss_v1(ps):
            return (0.5 * _sq(Y0 @ ps["W"].T - X) + _linear_term(ps["W"], M_v1)) / b

        def loss_v3(ps):
            return (0.5 * _sq(Y0 @ ps["W"].T - X) + _linear_term(ps["W"], M_v3)) / b

        def loss_asym(ps):
            Y = X @ ps["W"]
            return (0.5 * _sq(Y0 @ ps["W"].T - X) / b
                    + 0.5 * _sq(ps["W"] * (sig0 * np.sqrt(lam)))
                    - 0.5 * _sq(ps["W"] * sig0)
                    - 0.5 * _sq(Y * np.sqrt(lam)) / b + 0.5 * _sq(Y) / b)

        cases = [
            ("linear_pca/tied_full", loss_tied,
             lrl.linear_pca_grad(X, W, "tied_full")),
            ("linear_pca/subspace", loss_subspace,
             lrl.linear_pca_grad(X, W, "subspace")),
            ("linear_pca/encoder_only", loss_encoder,
             lrl.linear_pca_grad(X, W, "encoder_only")),
            ("weighted_subspace/v1", loss_v1,
             lrl.weighted_subspace_grad(X, W, lam, "v1")),
            ("weighted_subspace/v2", loss_v2,
             lrl.weighted_subspace_grad(X, W, lam, "v2")),
            ("weighted_subspace/v3", loss_v3,
             lrl.weighted_subspace_grad(X, W, lam, "v3")),
            ("asymmetric_pca_loss", loss_asym,
             lrl.asymmetric_pca_loss_grad(X, W, lam, sig0)),
        ]

        # Hebbian family pseudo-losses: -0.5||xW||^2 plus frozen linear terms
        gha_terms = {
            "plain": W @ np.tril(C0),
            "with_encoder": W @ np.tril(C0) + (X.T @ Y0) @ (np.tril(W.T @ W) - np.eye(k)),
            "plus_subspace": W @ np.tril(C0) + W @ (C0 - np.diag(np.diag(C0))),
        }
        for name, M in gha_terms.items():
            def loss_gha(ps, M=M):
                return (-0.5 * _sq(X @ ps["W"]) + _linear_term(ps["W"], M)) / b
            cases.append((f"gha/{name}", loss_gha, lrl.gha_grad(X, W, name)))

        M_rc = W @ np.tril(C0, -1)

        def loss_recon_combo(ps):
            R = X @ ps["W"] @ ps["W"].T - X
            return (0.5 * _sq(R) + _linear_term(ps["W"], M_rc)) / b

        cases.append(("gha/recon_combo", loss_recon_combo,
                      lrl.gha_grad(X, W, "recon_combo")))

        res_nd = lrl.nested_dropout_grad(X, W, 0.8, check_rng(1234 + inst))
        mask = res_nd.info["mask"]

        def loss_nested(ps):
            R = ((X @ ps["W"]) * mask) @ ps["W"].T - X
            return 0.5 * _sq(R) / b

        cases.append(("nested_dropout", loss_nested, res_nd))

        res_wv = lrl.weighted_variance_grad(X, W, lambdas=np.sort(
            rng.uniform(0.0, 1.0, k))[::-1], alpha=-1.0, mode="fixed")
        lam_wv = res_wv.info["lambdas"]

        def loss_wv(ps, lam_wv=lam_wv, alpha=-1.0):
            Y = X @ ps["W"]
            R = Y @ ps["W"].T - X
            return 0.5 * (_sq(R) - alpha * _sq(Y * np.sqrt(lam_wv))) / b

        cases.append(("weighted_variance/fixed", loss_wv, res_wv))

        res_wvp = lrl.weighted_variance_grad(X, W, alpha=1.0,
                                             mode="variance_proportional")
        cases.append((
            "weighted_variance/variance_proportional",
            lambda ps, lam_wv=res_wvp.info["lambdas"], alpha=1.0: loss_wv(
                ps, lam_wv, alpha),
            res_wvp,
        ))

        res_wvs = lrl.weighted_variance_grad(X, W, alpha=-1.0, mode="stochastic",
                                             rho=0.8, rng=check_rng(99 + inst))
        Ms = res_wvs.info["masks"]

        def loss_wvs(ps):
            Y = X @ ps["W"]
            R = Y @ ps["W"].T - X
            return 0.5 * (_sq(R) + _sq(Y * Ms)) / b

        cases.append(("weighted_variance/stochastic", loss_wvs, res_wvs))

        for name, loss_fn, res in cases:
            rep = grad_check(loss_fn, {"W": W}, {"W": res.grad_w}, h=h, tol=tol)
            out.append(FdCase(name, inst, rep.max_rel_err, rep.passed))


def _nl_specs(inst):
    pool = [
        NonlinearitySpec("scaled_tanh", a=4.0),
        NonlinearitySpec("scaled_tanh", a=0.8),
        NonlinearitySpec("hard_tanh", a=1.5),
        NonlinearitySpec("asym_const", a=1.6),
        NonlinearitySpec("scaled_tanh", a=2.0),
    ]
    return pool[inst % len(pool)]


def _sigma_cases(rng, out, h, tol):
    """sigma-pca ops; statistics are frozen at the op's evaluation point."""
    for inst in range(5):
        X, W = _instance(rng)
        b = X.shape[0]
        k = W.shape[1]
        spec = _nl_specs(inst)

        def build(**kw):
            m = SigmaPcaModel(W=W.copy(), sigma=np.ones(k),
                              mean=np.zeros(X.shape[1]),
                              nonlinearity=kw.pop("nl", spec), **kw)
            update_statistics(m, X)
            return m

        model = build()
        mu0, sig0 = model.mean.copy(), model.sigma.copy()
        Xc = X - mu0

        def hval(Z, nl=spec):
            return nonlinearity_eval(nl, Z)[0]

        def loss_stopgrad(ps):
            H = hval((X - mu0) @ ps["W"] / sig0)
            return 0.5 * _sq(Xc - (H * sig0) @ W.T) / b

        def loss_full(ps):
            H = hval((X - mu0) @ ps["W"] / sig0)
            return 0.5 * _sq(Xc - (H * sig0) @ ps["W"].T) / b

        res_sg = sigma_pca_grad(build(decoder_mode="stopgrad"), X)
        res_full = sigma_pca_grad(build(decoder_mode="full"), X)
        cases = [
            ("sigma_pca/stopgrad", loss_stopgrad, {"W": res_sg.grad_w}),
            ("sigma_pca/full", loss_full, {"W": res_full.grad_w}),
        ]

        m_resc = build(decoder_mode="rescaled",
                       rescale_norm=("spectral", "frobenius", "nuclear")[inst % 3])
        res_resc = sigma_pca_grad(m_resc, X)
        cache0 = res_resc.info["cache"]
        nrm = {"spectral": np.max(sig0), "frobenius": np.linalg.norm(sig0),
               "nuclear": np.sum(sig0)}[m_resc.rescale_norm]
        H0S = (cache0.hz * sig0).copy()

        def loss_rescaled(ps):
            H = hval((X - mu0) @ ps["W"] / sig0)
            t1 = 0.5 * _sq(Xc - (H * sig0) @ W.T) / b
            t2 = 0.5 * _sq(Xc - H0S @ ps["W"].T) / (b * nrm)
            return t1 + t2

        cases.append(("sigma_pca/rescaled", loss_rescaled, {"W": res_resc.grad_w}))

        res_drop = sigma_pca_grad(build(decoder_mode="sigma_dropped"), X)
        M_dec = (cache0.xhat_c - Xc).T @ cache0.hz  # frozen decoder term

        def loss_dropped(ps):
            H = hval((X - mu0) @ ps["W"] / sig0)
            return (0.5 * _sq(Xc - (H * sig0) @ W.T)
                    + _linear_term(ps["W"], M_dec)) / b

        cases.append(("sigma_pca/sigma_dropped", loss_dropped, {"W": res_drop.grad_w}))

        m_conv = build(conventional=True, nl=NonlinearitySpec("scaled_tanh", a=1.0))
        res_conv = sigma_pca_grad(m_conv, X)
        Y0c = (X - mu0) @ W

        def loss_conv(ps):
            H = hval(Y0c, NonlinearitySpec("scaled_tanh", a=1.0))
            return 0.5 * _sq(Xc - H @ ps["W"].T) / b

        cases.append(("sigma_pca/conventional", loss_conv, {"W": res_conv.grad_w}))

        # trainable sigma: perturb sigma with everything else frozen
        sig_t = np.abs(rng.uniform(0.7, 1.8, size=k))
        m_tr = SigmaPcaModel(W=W.copy(), sigma=sig_t, mean=mu0,
                             nonlinearity=spec, sigma_mode="trainable",
                             l2_sigma=5e-3)
        res_tr = sigma_pca_grad(m_tr, X)

        def loss_sigma(ps):
            s = ps["sigma"]
            H = hval(Xc @ W / s)
            return 0.5 * _sq(Xc - (H * s) @ W.T) / b + 5e-3 * _sq(s)

        rep = grad_check(loss_sigma, {"sigma": sig_t.copy()},
                         {"sigma": res_tr.grad_sigma}, h=h, tol=tol)
        out.append(FdCase("trainable_sigma", inst, rep.max_rel_err, rep.passed))

        # ordering: embedded projective deflation (right factor frozen)
        m_pd = build(ordering="projective_deflation")
        sig_pd = m_pd.sigma.copy()
        res_pd = sigma_pca_grad(m_pd, X)

        def loss_deflation(ps):
            P = np.eye(k) - np.tril(ps["W"].T @ W, -1)
            H = hval(((X - mu0) @ ps["W"] @ P) / sig_pd)
            return 0.5 * _sq(Xc - (H * sig_pd) @ W.T) / b

        cases.append(("ordering/projective_deflation", loss_deflation,
                      {"W": res_pd.grad_w}))

        lam_o = np.sort(rng.uniform(0.2, 1.0, k))[::-1]
        lam_o[0] = 1.0
        m_wl = build(ordering="weighted_latent")
        m_wl.ordering_lambdas = lam_o
        res_wl = sigma_pca_grad(m_wl, X)
        K0 = W.T @ W
        Ywl0 = (X - mu0) @ W

        def loss_weighted_latent(ps):
            H = hval((X - mu0) @ ps["W"] / sig0)
            R = Ywl0 * lam_o - (H * (sig0 * lam_o)) @ K0
            return 0.5 * _sq(R) / b

        cases.append(("ordering/weighted_latent", loss_weighted_latent,
                      {"W": res_wl.grad_w}))

        m_ne = build(ordering="nested", ordering_rho=0.8)
        res_ne = sigma_pca_grad(m_ne, X, rng=check_rng(77 + inst))
        mask_ne = res_ne.info["mask"]

        def loss_nested(ps):
            H = hval((X - mu0) @ ps["W"] / sig0)
            R = ((H * mask_ne) * sig0) @ W.T - Xc
            G = ps["W"].T @ ps["W"] - np.eye(k)
            return 0.5 * _sq(R) / b + _sq(G)

        cases.append(("ordering/nested", loss_nested, {"W": res_ne.grad_w}))

        m_tri = build(ordering="triangular")
        m_tri.ordering_variant = 1 + inst % 6
        res_tri = sigma_pca_grad(m_tri, X)
        from .sigma_pca import _TRIANGULAR_ARGS, sigma_pca_forward
        M_tri = W @ np.triu(_TRIANGULAR_ARGS[m_tri.ordering_variant](
            sigma_pca_forward(m_tri, X)))

        def loss_triangular(ps):
            H = hval((X - mu0) @ ps["W"] / sig0)
            return (0.5 * _sq(Xc - (H * sig0) @ W.T)
                    + _linear_term(ps["W"], M_tri)) / b

        cases.append(("ordering/triangular", loss_triangular, {"W": res_tri.grad_w}))

        # latent-space reconstruction variants
        for variant in ("wtw_symreg", "tri_wtw_symreg", "plain_orthreg",
                        "plus_linear"):
            m_lat = build()
            res_lat = latent_recon_grad(m_lat, X, variant=variant, beta=0.7)
            if variant == "wtw_symreg":
                Kl = W.T @ W
            elif variant == "tri_wtw_symreg":
                Kl = np.tril(W.T @ W)
            else:
                Kl = np.eye(k)

            def loss_latent(ps, Kl=Kl, variant=variant):
                H = hval((X - mu0) @ ps["W"] / sig0)
                val = 0.5 * _sq((H * sig0) @ Kl - Ywl0) / b
                if variant == "plus_linear":
                    val += 0.5 * _sq((X - mu0) @ ps["W"] @ W.T - Xc) / b
                else:
                    G = ps["W"].T @ ps["W"] - np.eye(k)
                    val += 0.7 * _sq(G)
                return val

            rep = grad_check(loss_latent, {"W": W.copy()},
                             {"W": res_lat.grad_w}, h=h, tol=tol)
            out.append(FdCase(f"latent_recon/{variant}", inst,
                              rep.max_rel_err, rep.passed))

        for penalty in ("l1", "logcosh"):
            res_r = rica_grad(X, W, beta0=0.4, penalty=penalty)
            beta = res_r.info["beta"]

            def loss_rica(ps, penalty=penalty, beta=beta):
                Y = X @ ps["W"]
                pen = np.sum(np.abs(Y)) if penalty == "l1" \
                    else np.sum(np.logaddexp(Y, -Y) - np.log(2.0))
                return (0.5 * _sq((X @ W) @ ps["W"].T - X) + beta * pen) / b

            rep = grad_check(loss_rica, {"W": W.copy()}, {"W": res_r.grad_w},
                             h=h, tol=tol)
            out.append(FdCase(f"rica/{penalty}", inst, rep.max_rel_err, rep.passed))

        for form in ("dediag", "skew"):
            res_sk = skew_symmetric_grad(X, W, h="tanh", beta_mode="const",
                                         beta=0.6, form=form)
            M_sk = 0.6 * (W @ res_sk.info["M"])

            def loss_skew(ps, M_sk=M_sk):
                return (0.5 * _sq((X @ W) @ ps["W"].T - X)
                        + _linear_term(ps["W"], M_sk)) / b

            rep = grad_check(loss_skew, {"W": W.copy()}, {"W": res_sk.grad_w},
                             h=h, tol=tol)
            out.append(FdCase(f"skew_symmetric/{form}", inst,
                              rep.max_rel_err, rep.passed))

        # non-centred variants on shifted data
        Xs = X + rng.uniform(-1.0, 1.0, size=X.shape[1])
        m_nc = SigmaPcaModel(W=W.copy(), sigma=np.ones(k),
                             mean=np.zeros(X.shape[1]), nonlinearity=spec,
                             mu_mode="batch")
        res_wrap = noncentred_grad(m_nc, Xs, "wrap")
        Yr0 = Xs @ W
        muy0 = Yr0.mean(axis=0)
        snc0 = safe_std(Yr0.var(axis=0))

        def loss_wrap(ps):
            H = hval((Xs @ ps["W"] - muy0) / snc0)
            return 0.5 * _sq((H * snc0 + muy0) @ W.T - Xs) / b

        rep = grad_check(loss_wrap, {"W": W.copy()}, {"W": res_wrap.grad_w},
                         h=h, tol=tol)
        out.append(FdCase("noncentred/wrap", inst, rep.max_rel_err, rep.passed))

        res_bound = noncentred_grad(m_nc, Xs, "bound")
        mux0 = Xs.mean(axis=0)
        Xsc = Xs - mux0
        sb0 = safe_std((Xsc @ W).var(axis=0))

        def loss_bound(ps):
            H = hval(Xsc @ ps["W"] / sb0)
            val = 0.5 * _sq(Xsc - (H * sb0) @ W.T) / b
            Rm = (mux0[None, :] @ ps["W"]) @ ps["W"].T - mux0[None, :]
            return val + 0.5 * _sq(Rm)

        rep = grad_check(loss_bound, {"W": W.copy()}, {"W": res_bound.grad_w},
                         h=h, tol=tol)
        out.append(FdCase("noncentred/bound", inst, rep.max_rel_err, rep.passed))

        for name, loss_fn, grads in cases:
            rep = grad_check(loss_fn, {"W": W.copy()}, grads, h=h, tol=tol)
            out.append(FdCase(name, inst, rep.max_rel_err, rep.passed))


def _ica_cases(rng, out, h, tol):
    """linear-ica gradient ops: the two-layer model and the EASI field."""
    for inst in range(5):
        X, W = _instance(rng, b=10, p=4, k=3)
        k = W.shape[1]
        b = X.shape[0]
        V = np.linalg.qr(rng.standard_normal((k, k)))[0]
        spec = NonlinearitySpec("scaled_tanh", a=1.0 + inst)
        model = SigmaPcaModel(W=W.copy(), sigma=np.ones(k),
                              mean=np.zeros(X.shape[1]), nonlinearity=spec)
        update_statistics(model, X)
        mu0, sig0 = model.mean.copy(), model.sigma.copy()
        Xc = X - mu0
        res = two_layer_nlpca_grad(model, V, X)
        T0 = (Xc @ W) / sig0

        def hv(Z):
            return nonlinearity_eval(spec, Z)[0]

        def loss_w(ps):
            H = hv((X - mu0) @ ps["W"] / sig0)
            Hv = hv(T0 @ V)
            return (0.5 * _sq(Xc - (H * sig0) @ W.T)
                    + 0.5 * _sq(Hv @ V.T - T0)) / b

        def loss_v(ps):
            H = hv(T0 @ V)  # encoder rotation frozen
            Hl = hv((X - mu0) @ W / sig0)
            return (0.5 * _sq(H @ ps["V"].T - T0)
                    + 0.5 * _sq(Xc - (Hl * sig0) @ W.T)) / b

        rep = grad_check(loss_w, {"W": W.copy()}, {"W": res.grad_w}, h=h, tol=tol)
        out.append(FdCase("two_layer/W", inst, rep.max_rel_err, rep.passed))
        rep = grad_check(loss_v, {"V": V.copy()}, {"V": res.grad_v}, h=h, tol=tol)
        out.append(FdCase("two_layer/V", inst, rep.max_rel_err, rep.passed))

        # EASI: relative-gradient field checked via its frozen linear form
        Wk = np.linalg.qr(rng.standard_normal((k, k)))[0]
        Y = X[:, :k] @ Wk
        eta = 0.05
        W_next = easi_step(Wk, Y, np.tanh, eta)
        G_easi = (Wk - W_next) / eta

        def loss_easi(ps, M=G_easi):
            return _linear_term(ps["W"], M)

        rep = grad_check(loss_easi, {"W": Wk.copy()}, {"W": G_easi}, h=h, tol=tol)
        out.append(FdCase("easi/field", inst, rep.max_rel_err, rep.passed))


def run_fd_suite(seed=0, h=1e-6, tol=1e-5):
    """Run the whole suite; returns a list of FdCase records."""
    rng = check_rng(seed)
    out = []
    _linear_cases(rng, out, h, tol)
    _sigma_cases(rng, out, h, tol)
    _ica_cases(rng, out, h, tol)
    return out


def summarize(cases):
    """Worst case per op name."""
    worst = {}
    for c in cases:
        if c.name not in worst or c.max_rel_err > worst[c.name].max_rel_err:
            worst[c.name] = c
    return worst
