"""Binary checkpoint format: a flat map of parameter name -> shape -> values.

Layout (all integers little-endian, all floats little-endian float64):

    magic   b"CLCKPT1\\n"
    u32     parameter count
    per parameter:
        u16     name length in bytes
        bytes   utf-8 name
        u8      ndim
        u32*    one dimension per axis
        f64*    row-major values

Loading into a model requires exact name and shape agreement; mismatches
are rejected naming the offending parameter.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .module import Module

MAGIC = b"CLCKPT1\n"


def save_checkpoint(model: Module, path: str | Path) -> None:
    params = model.parameter_dict()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(params)))
        for name, p in params.items():
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", p.data.ndim))
            for dim in p.data.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(np.ascontiguousarray(p.data, dtype="<f8").tobytes())


def read_checkpoint(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file (bad magic)")
        (count,) = struct.unpack("<I", fh.read(4))
        out: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(ndim))
            n_values = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * n_values), dtype="<f8")
            out[name] = data.astype(np.float64).reshape(shape)
    return out


def load_checkpoint(model: Module, path: str | Path) -> None:
    stored = read_checkpoint(path)
    params = model.parameter_dict()
    for name, p in params.items():
        if name not in stored:
            raise ValueError(f"checkpoint missing parameter {name!r}")
        if stored[name].shape != p.data.shape:
            raise ValueError(
                f"checkpoint shape mismatch for parameter {name!r}: "
                f"stored {stored[name].shape}, model expects {p.data.shape}")
    extra = set(stored) - set(params)
    if extra:
        raise ValueError(f"checkpoint contains unknown parameter {sorted(extra)[0]!r}")
    for name, p in params.items():
        p.data = stored[name].copy()
