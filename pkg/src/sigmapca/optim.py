"""Optimizers, the training loop, and the finite-difference gradient checker.

The training loop owns one rng (shuffling and any stochastic method draws),
applies constraints in a fixed order after every optimizer step (orthogonality
projection first, unit-norm projection last), and checkpoints on the lowest
epoch loss.  Identical (seed, config, data) re-runs are bit-identical.
"""

import copy
from dataclasses import dataclass, field

import numpy as np

from .constraints import (ConstraintSpec, DegenerateColumnError, orthogonalize,
                          orth_reg_grad, project_unit_columns,
                          unit_norm_reg_grad, weight_norm_map)
from .linalg import EPS_STD
from .validation import check_data, check_rng


@dataclass
class TrainConfig:
    optimizer: str = "sgd"   # sgd | adam
    lr: float = 0.01
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 100
    epochs: int = 200
    seed: int = 0
    constraints: ConstraintSpec = field(default_factory=ConstraintSpec)
    checkpoint: str = "best_loss"  # best_loss | last

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        for name in ("momentum", "beta1", "beta2"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {v}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")
        if self.checkpoint not in ("best_loss", "last"):
            raise ValueError(f"unknown checkpoint mode {self.checkpoint!r}")


class TrainingDiverged(RuntimeError):
    """Raised on a non-finite loss or gradient; carries a diagnostic snapshot."""

    def __init__(self, message, snapshot):
        super().__init__(message)
        self.snapshot = snapshot


@dataclass
class SgdState:
    lr: float
    momentum: float = 0.0
    velocity: dict | None = None


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict | None = None
    v: dict | None = None


def make_optimizer(config):
    if config.optimizer == "sgd":
        return SgdState(lr=config.lr, momentum=config.momentum)
    return AdamState(lr=config.lr, beta1=config.beta1, beta2=config.beta2,
                     eps=config.adam_eps)


def optimizer_step(state, params, grads):
    """Apply one momentum-SGD or Adam update; returns (state, new params)."""
    new = {}
    if isinstance(state, SgdState):
        if state.velocity is None:
            state.velocity = {k: np.zeros_like(v) for k, v in params.items()}
        for k, p in params.items():
            if k not in grads:
                new[k] = p
                continue
            state.velocity[k] = state.momentum * state.velocity[k] + grads[k]
            new[k] = p - state.lr * state.velocity[k]
        return state, new
    if isinstance(state, AdamState):
        if state.m is None:
            state.m = {k: np.zeros_like(v) for k, v in params.items()}
            state.v = {k: np.zeros_like(v) for k, v in params.items()}
        state.t += 1
        bc1 = 1.0 - state.beta1**state.t
        bc2 = 1.0 - state.beta2**state.t
        for k, p in params.items():
            if k not in grads:
                new[k] = p
                continue
            g = grads[k]
            state.m[k] = state.beta1 * state.m[k] + (1 - state.beta1) * g
            state.v[k] = state.beta2 * state.v[k] + (1 - state.beta2) * g * g
            new[k] = p - state.lr * (state.m[k] / bc1) / (np.sqrt(state.v[k] / bc2) + state.eps)
        return state, new
    raise TypeError(f"unknown optimizer state {type(state)!r}")


def _reinit_degenerate_columns(W, rng):
    """Replace ~zero-norm columns with fresh random unit directions."""
    norms = np.linalg.norm(W, axis=0)
    bad = norms < 1e-12
    if np.any(bad):
        fresh = rng.standard_normal((W.shape[0], int(bad.sum())))
        fresh /= np.linalg.norm(fresh, axis=0)
        W = W.copy()
        W[:, bad] = fresh
    return W


def _apply_constraints(W, spec, rng):
    """Post-step constraint order: orthogonality projection, then unit norm."""
    if spec.orthogonality in ("iterative", "gram_schmidt"):
        W = _reinit_degenerate_columns(W, rng)
        W = orthogonalize(W, spec.orthogonality, beta=spec.beta,
                          max_iter=spec.max_iter, tol=spec.tol).W
    if spec.unit_norm in ("project", "weight_norm"):
        try:
            W = project_unit_columns(W)
        except DegenerateColumnError:
            W = project_unit_columns(_reinit_degenerate_columns(W, rng))
    return W


def _constraint_reg_grads(W, spec, batch):
    """Gradient additions for regulariser-style constraints."""
    g = np.zeros_like(W)
    if spec.orthogonality == "symmetric_reg":
        g += orth_reg_grad(W, "symmetric", alpha=spec.alpha)
    elif spec.orthogonality == "asymmetric_reg":
        if spec.sigma_weighted:
            sig = np.sqrt((batch @ W).var(axis=0))
            g += orth_reg_grad(W, "asymmetric_sigma", beta=spec.beta, sigma_hat=sig)
        else:
            g += orth_reg_grad(W, "asymmetric", beta=spec.beta)
    if spec.unit_norm == "regularize":
        g += unit_norm_reg_grad(W, spec.unit_strength)
    return g


def train(grad_fn, params, X, config, constrained=("W",), post_step=None):
    """Run mini-batch training of grad_fn over X.

    grad_fn(params, batch, rng) -> (loss, grads dict); it owns any per-step
    statistics updates.  Constrained params receive the configured constraint
    treatment; a param named "sigma" is floored at the std eps; post_step, if
    given, may adjust params after the constraints (e.g. keep a rotation
    factor orthogonal).  Returns (params, history) with the checkpointed
    parameters.
    """
    X = check_data(X)
    params = {k: np.asarray(v, dtype=np.float64).copy() for k, v in params.items()}
    spec = config.constraints
    rng = check_rng(config.seed)
    opt = make_optimizer(config)
    n = X.shape[0]
    weight_norm = spec.unit_norm == "weight_norm"

    history = {"epoch_loss": [], "orth_residual": [], "best_epoch": -1}
    best_loss = np.inf
    best_params = None

    def effective(ps):
        if not weight_norm:
            return ps, None
        maps = {}
        eff = dict(ps)
        for name in constrained:
            eff[name], maps[name] = weight_norm_map(ps[name])
        return eff, maps

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, config.batch_size):
            batch = X[order[start:start + config.batch_size]]
            eff, maps = effective(params)
            loss, grads = grad_fn(eff, batch, rng)
            if not np.isfinite(loss) or any(not np.all(np.isfinite(g)) for g in grads.values()):
                raise TrainingDiverged(
                    f"non-finite loss/gradient at epoch {epoch}",
                    snapshot={"epoch": epoch, "step": start // config.batch_size,
                              "loss": float(loss),
                              "params": {k: v.copy() for k, v in params.items()}},
                )
            for name in constrained:
                if name in grads:
                    grads[name] = grads[name] + _constraint_reg_grads(eff[name], spec, batch)
                    if weight_norm:
                        grads[name] = maps[name](grads[name])
            opt, params = optimizer_step(opt, params, grads)
            for name in constrained:
                params[name] = _apply_constraints(params[name], spec, rng)
            if "sigma" in params:
                params["sigma"] = np.maximum(params["sigma"], EPS_STD)
            if post_step is not None:
                params = post_step(params, rng)
            losses.append(loss)
        epoch_loss = float(np.mean(losses)) if losses else np.nan
        eff, _ = effective(params)
        history["epoch_loss"].append(epoch_loss)
        history["orth_residual"].append(
            float(np.linalg.norm(eff[constrained[0]].T @ eff[constrained[0]]
                                 - np.eye(eff[constrained[0]].shape[1])))
            if constrained else np.nan
        )
        if epoch_loss < best_loss:
            best_loss = epoch_loss
            best_params = {k: v.copy() for k, v in params.items()}
            history["best_epoch"] = epoch

    if config.checkpoint == "best_loss" and best_params is not None:
        params = best_params
    params, _ = effective(params)
    return params, history


@dataclass
class GradCheckReport:
    max_rel_err: float
    passed: bool
    per_param: dict
    h: float
    tol: float


def grad_check(loss_fn, params, grads, h=1e-6, tol=1e-5, max_coords=64, rng=None):
    """Central-difference check of analytic gradients.

    loss_fn(params) must hold every stop-gradient factor and estimated
    statistic frozen, which is exactly what the stop-gradient operator means.
    Coordinates are sampled for large parameters.  The relative error uses a
    floor so that structurally-zero gradient entries are only checked at the
    finite-difference noise level.
    """
    rng = check_rng(rng if rng is not None else 0)
    per_param = {}
    worst = 0.0
    for name, value in params.items():
        if name not in grads or grads[name] is None:
            continue
        g = np.asarray(grads[name], dtype=np.float64)
        flat = value.size
        idx = np.arange(flat) if flat <= max_coords \
            else rng.choice(flat, size=max_coords, replace=False)
        floor = 1e-3 * (1.0 + float(np.max(np.abs(g))))
        rel = 0.0
        work = {k: v.copy() for k, v in params.items()}
        for i in idx:
            orig = work[name].flat[i]
            work[name].flat[i] = orig + h
            lp = loss_fn(work)
            work[name].flat[i] = orig - h
            lm = loss_fn(work)
            work[name].flat[i] = orig
            fd = (lp - lm) / (2.0 * h)
            an = g.flat[i]
            rel = max(rel, abs(fd - an) / max(abs(fd), abs(an), floor))
        per_param[name] = rel
        worst = max(worst, rel)
    return GradCheckReport(max_rel_err=worst, passed=worst <= tol,
                           per_param=per_param, h=h, tol=tol)
