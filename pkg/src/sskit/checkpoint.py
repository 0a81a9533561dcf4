"""Model checkpoint files.

Layout: magic "SSKM", version, a JSON architecture descriptor (which also
carries standardizer statistics and the alphabet), then named
little-endian float64 tensors.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"SSKM"
VERSION = 1


def save_checkpoint(path, descriptor: dict, tensors: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        desc = json.dumps(descriptor, sort_keys=True).encode("utf-8")
        fh.write(struct.pack("<4sII", MAGIC, VERSION, len(desc)))
        fh.write(desc)
        fh.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            arr = np.asarray(arr, dtype=np.float64)
            nb = name.encode("utf-8")
            fh.write(struct.pack("<H", len(nb)))
            fh.write(nb)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype("<f8").tobytes())


def load_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        magic, version, desc_len = struct.unpack("<4sII", fh.read(12))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        if version != VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        descriptor = json.loads(fh.read(desc_len).decode("utf-8"))
        (count,) = struct.unpack("<I", fh.read(4))
        tensors = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            n = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(fh.read(8 * n), dtype="<f8")
            tensors[name] = data.reshape(shape).copy()
    return descriptor, tensors
