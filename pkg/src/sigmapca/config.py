"""Plain-text key-value run configuration.

Format: one `section.key = value` per line, with # comments.  Unknown keys
are rejected with a suggestion; CLI flags override file values.
"""

import difflib

# key -> (type, default); defaults mirror the documented training recipes
KNOWN_KEYS = {
    "optimizer.name": (str, "sgd"),
    "optimizer.lr": (float, 0.01),
    "optimizer.momentum": (float, 0.9),
    "optimizer.beta1": (float, 0.9),
    "optimizer.beta2": (float, 0.999),
    "optimizer.eps": (float, 1e-8),
    "train.batch_size": (int, 100),
    "train.epochs": (int, 200),
    "train.seed": (int, 0),
    "train.checkpoint": (str, "best_loss"),
    "constraints.unit_norm": (str, "project"),
    "constraints.orthogonality": (str, "none"),
    "constraints.alpha": (float, 0.125),
    "constraints.beta": (float, 0.5),
    "method.name": (str, "nlpca"),
    "method.k": (int, 3),
    "method.a": (float, 4.0),
    "method.nonlinearity": (str, "scaled_tanh"),
    "method.derivative_mode": (str, "exact"),
    "method.decoder_mode": (str, "stopgrad"),
    "method.sigma_mode": (str, "batch"),
    "method.mu_mode": (str, "batch"),
    "method.ordering": (str, "none"),
    "method.variant": (str, "asymmetric"),
    "method.rho": (float, 0.9),
    "method.beta0": (float, 0.5),
    "method.penalty": (str, "l1"),
    "method.l2_sigma": (float, 1e-3),
    "method.contrast": (str, "logcosh"),
    "data.kind": (str, "signals"),
    "data.n": (int, 2000),
    "data.seed": (int, 0),
    "data.noise_rel": (float, 0.05),
    "data.theta": (float, 0.7853981633974483),
    "data.dist": (str, "uniform"),
    "data.mixing": (str, "orthogonal"),
    "data.cond_max": (float, 4.0),
    "data.image_size": (int, 16),
    "data.n_images": (int, 200),
    "data.patch_size": (int, 8),
    "data.stride": (int, 2),
}


class ConfigError(ValueError):
    pass


def _parse_value(key, raw, lineno):
    typ, _ = KNOWN_KEYS[key]
    raw = raw.strip()
    try:
        if typ is bool:
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError:
        raise ConfigError(
            f"line {lineno}: cannot parse {raw!r} as {typ.__name__} for {key}"
        ) from None


def parse_config_text(text):
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in KNOWN_KEYS:
            hint = difflib.get_close_matches(key, KNOWN_KEYS, n=1)
            suffix = f"; did you mean {hint[0]!r}?" if hint else ""
            raise ConfigError(f"line {lineno}: unknown key {key!r}{suffix}")
        values[key] = _parse_value(key, raw, lineno)
    return values


def load_config(path=None, overrides=None):
    """Defaults, then file values, then explicit overrides; validated."""
    values = {key: default for key, (_, default) in KNOWN_KEYS.items()}
    if path is not None:
        with open(path) as fh:
            values.update(parse_config_text(fh.read()))
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        if key not in KNOWN_KEYS:
            raise ConfigError(f"unknown override key {key!r}")
        values[key] = KNOWN_KEYS[key][0](val)
    _validate(values)
    return values


def _validate(values):
    if values["optimizer.lr"] <= 0:
        raise ConfigError("optimizer.lr must be > 0")
    for key in ("optimizer.momentum", "optimizer.beta1", "optimizer.beta2"):
        if not 0.0 <= values[key] < 1.0:
            raise ConfigError(f"{key} must be in [0, 1)")
    if values["train.batch_size"] < 1:
        raise ConfigError("train.batch_size must be >= 1")
    if values["train.epochs"] < 0:
        raise ConfigError("train.epochs must be >= 0")
