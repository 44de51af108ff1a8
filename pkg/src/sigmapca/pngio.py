"""Minimal self-contained PNG writer and filter-grid rendering.

Writes valid 8-bit grayscale or RGB PNGs (zlib-compressed, filter type 0).
Per-filter min-max normalisation is a display transform only and is never fed
back into any computation.
"""

import struct
import zlib

import numpy as np


def _chunk(tag, payload):
    out = struct.pack(">I", len(payload)) + tag + payload
    return out + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)


def write_png(path, image):
    """Write a (h, w) or (h, w, 3) uint8 array as a PNG file."""
    image = np.asarray(image)
    if image.dtype != np.uint8:
        raise ValueError("write_png expects uint8 data")
    if image.ndim == 2:
        color_type, channels = 0, 1
    elif image.ndim == 3 and image.shape[2] == 3:
        color_type, channels = 2, 3
    else:
        raise ValueError(f"unsupported image shape {image.shape}")
    h, w = image.shape[:2]
    raw = b"".join(
        b"\x00" + image[row].tobytes() for row in range(h)
    )
    header = struct.pack(">IIBBBBB", w, h, 8, color_type, 0, 0, 0)
    with open(path, "wb") as fh:
        fh.write(b"\x89PNG\r\n\x1a\n")
        fh.write(_chunk(b"IHDR", header))
        fh.write(_chunk(b"IDAT", zlib.compress(raw, 6)))
        fh.write(_chunk(b"IEND", b""))


def filter_grid(W, patch_shape, tile_gap=1, n_cols=None):
    """Render the columns of W as a tiled grid of per-tile normalised filters.

    patch_shape is (h, w) or (h, w, c); returns a uint8 array ready for
    write_png.  Tile count equals the number of columns of W.
    """
    W = np.asarray(W, dtype=np.float64)
    k = W.shape[1]
    shape = tuple(patch_shape)
    if int(np.prod(shape)) != W.shape[0]:
        raise ValueError(f"patch shape {shape} does not match filter size {W.shape[0]}")
    channels = shape[2] if len(shape) == 3 else 1
    h, w = shape[0], shape[1]
    if n_cols is None:
        n_cols = int(np.ceil(np.sqrt(k)))
    n_rows = int(np.ceil(k / n_cols))
    grid_shape = (n_rows * h + (n_rows + 1) * tile_gap,
                  n_cols * w + (n_cols + 1) * tile_gap)
    if channels == 3:
        grid = np.zeros(grid_shape + (3,), dtype=np.uint8)
    else:
        grid = np.zeros(grid_shape, dtype=np.uint8)
    for idx in range(k):
        tile = W[:, idx].reshape(shape)
        lo, hi = tile.min(), tile.max()
        tile = (tile - lo) / (hi - lo) if hi > lo else np.full(shape, 0.5)
        tile = np.round(tile * 255.0).astype(np.uint8)
        if channels == 1 and tile.ndim == 3:
            tile = tile[:, :, 0]
        r, c = divmod(idx, n_cols)
        top = tile_gap + r * (h + tile_gap)
        left = tile_gap + c * (w + tile_gap)
        grid[top:top + h, left:left + w] = tile
    return grid
