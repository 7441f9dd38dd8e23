"""Flat binary weight files.

Layout (all integers little-endian):

    magic   4 bytes  b"DRWT"
    version u8       1
    count   u32      number of tensors
    table   count entries of: ndim u8, then ndim x u32 dims
    data    contiguous float32 values for each tensor, in table order

Tensors are positional: they map onto a model's state dict in iteration
order, which is fixed by the model configuration.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import ConfigError

MAGIC = b"DRWT"
VERSION = 1


def save_weights(arrays, path) -> None:
    arrays = [np.asarray(a, dtype=np.float32) for a in arrays]
    parts = [MAGIC, struct.pack("<BI", VERSION, len(arrays))]
    for arr in arrays:
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
    for arr in arrays:
        parts.append(np.ascontiguousarray(arr).astype("<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_weights(path) -> list[np.ndarray]:
    data = Path(path).read_bytes()
    if len(data) < 9:
        raise ConfigError("weights file truncated before header")
    if data[:4] != MAGIC:
        raise ConfigError(f"bad magic {data[:4]!r} in weights file")
    version, count = struct.unpack_from("<BI", data, 4)
    if version != VERSION:
        raise ConfigError(f"unsupported weights version {version}")
    offset = 9
    shapes: list[tuple[int, ...]] = []
    for _ in range(count):
        (ndim,) = struct.unpack_from("<B", data, offset)
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", data, offset)
        offset += 4 * ndim
        shapes.append(shape)
    arrays: list[np.ndarray] = []
    for shape in shapes:
        n = int(np.prod(shape)) if shape else 1
        end = offset + 4 * n
        if end > len(data):
            raise ConfigError("weights file truncated in data section")
        arr = np.frombuffer(data, dtype="<f4", count=n, offset=offset).reshape(shape)
        arrays.append(arr.astype(np.float32))
        offset = end
    if offset != len(data):
        raise ConfigError("trailing bytes after weights data")
    return arrays
