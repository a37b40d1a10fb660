"""Binary checkpoints.

Layout (all integers unsigned 64-bit little-endian)::

    b"CSQ1"
    config byte length, config as UTF-8 key=value text
    tensor count
    per tensor: name length, name bytes, rank, dims..., float64 LE values (row-major)
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .model import ModelConfig
from .tensor import Tensor

MAGIC = b"CSQ1"


def save_checkpoint(path: str | Path, config: ModelConfig, params: dict[str, Tensor]) -> None:
    text = config.to_text().encode("utf-8")
    chunks = [MAGIC, struct.pack("<Q", len(text)), text, struct.pack("<Q", len(params))]
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name].data, dtype="<f8")
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<Q", len(raw)) + raw)
        chunks.append(struct.pack(f"<{1 + arr.ndim}Q", arr.ndim, *arr.shape))
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path: str | Path) -> tuple[ModelConfig, dict[str, Tensor]]:
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic {buf[:4]!r})")
    pos = 4

    def u64() -> int:
        nonlocal pos
        (v,) = struct.unpack_from("<Q", buf, pos)
        pos += 8
        return v

    n = u64()
    config = ModelConfig.from_text(buf[pos:pos + n].decode("utf-8"))
    pos += n
    params = {}
    for _ in range(u64()):
        n = u64()
        name = buf[pos:pos + n].decode("utf-8")
        pos += n
        shape = tuple(u64() for _ in range(u64()))
        count = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).reshape(shape)
        pos += 8 * count
        params[name] = Tensor(arr.astype(np.float64), requires_grad=True)
    if pos != len(buf):
        raise ValueError(f"{path}: {len(buf) - pos} trailing bytes")
    return config, params
