"""Run artifacts: checkpoint files, CSV traces, JSON metrics, run manifests.

Checkpoint layout (little-endian): magic b"SPCA", version u32, array count
u32; then per array a u16 name length, the utf-8 name, u32 ndim, u64 dims,
and the row-major float64 payload.  Everything written here is a pure
function of the run inputs, so re-running a manifest reproduces the bytes.
"""

import csv
import json
import os
import struct

import numpy as np

FORMAT_VERSION = 1
SCHEMA_VERSION = 1


def save_checkpoint(path, arrays):
    """Write a dict of float64 arrays to a versioned binary file."""
    with open(path, "wb") as fh:
        fh.write(b"SPCA")
        fh.write(struct.pack("<II", FORMAT_VERSION, len(arrays)))
        for name, arr in arrays.items():
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        if fh.read(4) != b"SPCA":
            raise ValueError(f"{path} is not a checkpoint file")
        version, count = struct.unpack("<II", fh.read(8))
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        arrays = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
            data = np.frombuffer(fh.read(8 * int(np.prod(shape))), dtype="<f8")
            arrays[name] = data.reshape(shape).copy()
    return arrays


def write_csv(path, header, columns):
    """RFC-4180 style CSV with a header row; columns are equal-length arrays."""
    columns = [np.asarray(c) for c in columns]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([repr(float(v)) for v in row])


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(_to_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_manifest(outdir, command, config, seed, metrics, files):
    """Record everything needed to reproduce the run bitwise."""
    from . import __version__

    manifest = {
        "command": command,
        "config": _to_jsonable(config),
        "seed": int(seed),
        "toolkit_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "metrics": _to_jsonable(metrics),
        "files": sorted(files),
    }
    path = os.path.join(outdir, "manifest.json")
    write_json(path, manifest)
    return path
