"""Named-tensor checkpoint container.

Little-endian binary layout, all integers unsigned LE:

    magic   4 bytes  b"MCKP"
    version u32      1
    meta    u32 length + UTF-8 JSON (model config and friends)
    count   u32
    then per tensor, sorted by name:
      name  u16 length + UTF-8
      dtype u8: 0=float64, 1=float32, 2=uint8, 3=int64
      ndim  u8
      dims  ndim x u64
      data  raw C-order little-endian bytes

Tensors are written sorted by name, so semantically equal checkpoints are
byte-identical regardless of dict insertion order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .denoiser import ToyConfig, ToyDenoiser

MAGIC = b"MCKP"
VERSION = 1

_DTYPE_CODES = {
    np.dtype("<f8"): 0,
    np.dtype("<f4"): 1,
    np.dtype("u1"): 2,
    np.dtype("<i8"): 3,
}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}


def save_checkpoint(path, tensors: dict, meta: dict | None = None) -> None:
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    chunks = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(meta_bytes)), meta_bytes]
    chunks.append(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name])
        le = arr.dtype.newbyteorder("<")
        if le not in _DTYPE_CODES:
            raise ValueError(f"{name}: unsupported dtype {arr.dtype}")
        arr = arr.astype(le, copy=False)
        nb = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(nb)))
        chunks.append(nb)
        chunks.append(struct.pack("<BB", _DTYPE_CODES[le], arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, buf: bytes, path):
        self.buf = buf
        self.off = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.buf):
            raise ValueError(f"{self.path}: truncated checkpoint")
        out = self.buf[self.off : self.off + n]
        self.off += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path):
    """Returns (tensors dict, meta dict)."""
    rd = _Reader(Path(path).read_bytes(), path)
    if rd.take(4) != MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    (version,) = rd.unpack("<I")
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    (meta_len,) = rd.unpack("<I")
    meta = json.loads(rd.take(meta_len).decode("utf-8"))
    (count,) = rd.unpack("<I")
    tensors = {}
    for _ in range(count):
        (name_len,) = rd.unpack("<H")
        name = rd.take(name_len).decode("utf-8")
        code, ndim = rd.unpack("<BB")
        if code not in _CODE_DTYPES:
            raise ValueError(f"{path}: tensor {name!r} has unknown dtype code {code}")
        shape = rd.unpack(f"<{ndim}Q")
        dt = _CODE_DTYPES[code]
        nbytes = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
        tensors[name] = np.frombuffer(rd.take(nbytes), dtype=dt).reshape(shape).copy()
    if rd.off != len(rd.buf):
        raise ValueError(f"{path}: {len(rd.buf) - rd.off} trailing bytes after last tensor")
    return tensors, meta


def save_denoiser(path, model: ToyDenoiser) -> None:
    cfg = model.config
    meta = {
        "kind": "toy-denoiser",
        "dtype": model.dtype.name,
        "config": {
            "c1": cfg.c1,
            "c2": cfg.c2,
            "enc_width": cfg.enc_width,
            "groups": cfg.groups,
            "lora_rank": cfg.lora_rank,
        },
    }
    save_checkpoint(path, model.params, meta)


def load_denoiser(path) -> ToyDenoiser:
    tensors, meta = load_checkpoint(path)
    if meta.get("kind") != "toy-denoiser":
        raise ValueError(f"{path}: checkpoint is not a toy denoiser")
    c = meta["config"]
    config = ToyConfig(
        c1=int(c["c1"]),
        c2=int(c["c2"]),
        enc_width=int(c["enc_width"]),
        groups=int(c["groups"]),
        lora_rank=int(c["lora_rank"]),
    )
    dtype = np.dtype(meta.get("dtype", "float64"))
    params = {k: v.astype(dtype, copy=False) for k, v in tensors.items()}
    return ToyDenoiser(config, params, dtype=dtype)
