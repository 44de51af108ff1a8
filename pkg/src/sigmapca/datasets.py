"""Synthetic data generators carrying ground truth, plus patch extraction.

Every generator is deterministic per seed.
"""

from dataclasses import dataclass, field

import numpy as np

from .validation import check_rng


@dataclass
class SignalSpec:
    kind: str            # sine | square | sawtooth
    period: float
    target_std: float = 1.0
    noise_std: float | None = None  # defaults to 0.05 * target_std

    def __post_init__(self):
        if self.kind not in ("sine", "square", "sawtooth"):
            raise ValueError(f"unknown signal kind {self.kind!r}")
        if self.period <= 0:
            raise ValueError("period must be > 0")
        if self.noise_std is None:
            self.noise_std = 0.05 * self.target_std


@dataclass
class GroundTruthMixing:
    """True mixing X = S0 @ B0_inv and the factors of its decomposition.

    E0 (p, k) orthonormal, Sigma0 the singular values of the mixing map, and
    V0 (k, k) orthogonal satisfy B0_inv = V0^T diag(Sigma0) E0^T.  For an
    orthogonal mixing Sigma0 = 1 and V0 = I; the source scales live in S0.
    """

    B0_inv: np.ndarray
    E0: np.ndarray
    Sigma0: np.ndarray
    V0: np.ndarray
    kind: str
    S0: np.ndarray | None = None
    extras: dict = field(default_factory=dict)


def gen_signals(n, specs, seed=0):
    """Noisy sine/square/sawtooth columns, centred and rescaled to target_std.

    The rescaling happens after the noise is added, so the sample std matches
    the target exactly.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    rng = check_rng(seed)
    t = np.arange(n, dtype=np.float64)
    cols = []
    for spec in specs:
        if isinstance(spec, dict):
            spec = SignalSpec(**spec)
        phase = t / spec.period
        if spec.kind == "sine":
            s = np.sin(2.0 * np.pi * phase)
        elif spec.kind == "square":
            s = np.sign(np.sin(2.0 * np.pi * phase))
        else:  # sawtooth
            s = 2.0 * np.mod(phase, 1.0) - 1.0
        s = s + rng.normal(0.0, spec.noise_std, size=n)
        s = s - s.mean()
        std = s.std()
        if std > 0:
            s = s * (spec.target_std / std)
        cols.append(s)
    return np.column_stack(cols)


def gen_mixing(k, p, kind="orthogonal", cond_max=10.0, seed=0):
    """Random mixing map with its rotation/scale/rotation factors recorded."""
    if k > p:
        raise ValueError("need k <= p")
    rng = check_rng(seed)
    from .linalg import random_semi_orthogonal

    if kind == "orthogonal":
        Q = random_semi_orthogonal(p, k, rng)
        return GroundTruthMixing(B0_inv=Q.T.copy(), E0=Q, Sigma0=np.ones(k),
                                 V0=np.eye(k), kind=kind)
    if kind != "non_orthogonal":
        raise ValueError(f"unknown mixing kind {kind!r}")
    for _ in range(1000):
        M = rng.standard_normal((k, p))
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
        if s[0] / s[-1] <= cond_max:
            return GroundTruthMixing(B0_inv=M, E0=Vt.T.copy(), Sigma0=s.copy(),
                                     V0=U.T.copy(), kind=kind)
    raise RuntimeError(f"could not draw a mixing with condition <= {cond_max}")


def mix_sources(S0, gtm):
    """Apply the recorded mixing to sources; attaches S0 to the ground truth."""
    gtm.S0 = np.asarray(S0, dtype=np.float64)
    return gtm.S0 @ gtm.B0_inv


def gen_points_2d(dist, n, theta, equal_var=True, seed=0):
    """2-D iid points rotated by theta; returns (X, ground truth).

    Axis distributions: uniform (sub-Gaussian), laplace (super-Gaussian), or
    gaussian, all unit variance; with equal_var False the second axis has
    std 0.5.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    rng = check_rng(seed)
    if dist == "uniform":
        S = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=(n, 2))
    elif dist == "laplace":
        S = rng.laplace(0.0, 1.0 / np.sqrt(2.0), size=(n, 2))
    elif dist == "gaussian":
        S = rng.standard_normal((n, 2))
    else:
        raise ValueError(f"unknown distribution {dist!r}")
    if not equal_var:
        S[:, 1] *= 0.5
    c, s = np.cos(theta), np.sin(theta)
    R = np.array([[c, -s], [s, c]])
    gtm = GroundTruthMixing(B0_inv=R.T.copy(), E0=R.copy(), Sigma0=np.ones(2),
                            V0=np.eye(2), kind="orthogonal", S0=S,
                            extras={"theta": float(theta)})
    return S @ gtm.B0_inv, gtm


def extract_patches(images, size, stride=1, zero_pad=False):
    """Sliding-window patches, one flattened patch per row, raster order.

    zero_pad pads each image by size // 2 on every side.  Channels are
    flattened into the row, so the per-patch dimensionality is size*size*c.
    """
    if size <= 0:
        raise ValueError("patch size must be positive")
    if stride <= 0:
        raise ValueError("stride must be positive")
    rows = []
    for img in images:
        img = np.asarray(img, dtype=np.float64)
        if img.ndim == 2:
            img = img[:, :, None]
        if zero_pad:
            pad = size // 2
            img = np.pad(img, ((pad, pad), (pad, pad), (0, 0)))
        h, w, c = img.shape
        if size > h or size > w:
            raise ValueError("patch size exceeds (padded) image dims")
        for i in range(0, h - size + 1, stride):
            for j in range(0, w - size + 1, stride):
                rows.append(img[i:i + size, j:j + size, :].ravel())
    return np.asarray(rows)


def gen_bar_images(n_images, image_size=16, seed=0, n_bars=(1, 3), noise_std=0.05):
    """Procedural corpus of oriented smooth bars on a dark background.

    A desk-scale stand-in for natural image patches: the dominant structure
    is oriented edges, so filter-learning methods produce oriented filters.
    """
    rng = check_rng(seed)
    grid = np.arange(image_size, dtype=np.float64)
    jj, ii = np.meshgrid(grid, grid)
    images = []
    for _ in range(n_images):
        img = np.zeros((image_size, image_size))
        for _ in range(rng.integers(n_bars[0], n_bars[1] + 1)):
            angle = rng.uniform(0.0, np.pi)
            offset = rng.uniform(-0.35, 0.35) * image_size
            width = rng.uniform(0.6, 1.4)
            amp = rng.uniform(0.5, 1.0) * rng.choice([-1.0, 1.0])
            # signed distance of each pixel to the bar's centre line
            d = (ii - image_size / 2) * np.cos(angle) \
                + (jj - image_size / 2) * np.sin(angle) - offset
            img += amp * np.exp(-0.5 * (d / width) ** 2)
        img += rng.normal(0.0, noise_std, img.shape)
        images.append(img)
    return images


def load_image_folder(path):
    """8-bit grayscale/RGB images from a directory, sorted filename order."""
    import os

    try:
        from PIL import Image
    except ImportError as exc:  # pragma: no cover
        raise ImportError("image folder ingestion needs Pillow "
                          "(pip install sigmapca[images])") from exc
    names = sorted(
        f for f in os.listdir(path)
        if f.lower().endswith((".png", ".jpg", ".jpeg", ".bmp", ".gif"))
    )
    if not names:
        raise ValueError(f"no images found in {path}")
    images = []
    for name in names:
        with Image.open(os.path.join(path, name)) as im:
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB")
            images.append(np.asarray(im, dtype=np.float64) / 255.0)
    return images
