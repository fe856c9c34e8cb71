"""Dense field primitives: video clips, flow fields, masks, and their file formats.

Conventions shared by every module in the package:
  * x grows rightward, y downward; the origin sits at the center of the
    top-left pixel, so pixel (x, y) has center (x, y).
  * Flow is stored relative to frame 1: position in frame i equals position
    in frame 1 plus flow[i]. Consequently flow[0] is identically zero.
  * Arrays are frozen (read-only) after construction; instances are safe to
    share across workers.

Flow frames are read and written as Middlebury .flo files (little-endian:
float32 magic 202021.25, int32 width, int32 height, row-major interleaved
float32 dx, dy). Masks are binary PGM (P5, maxval 255, nonzero meaning 1).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels

FLO_MAGIC = 202021.25


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class VideoClip:
    """An (L, H, W, 3) stack of RGB frames with values in [0, 1]."""

    frames: np.ndarray
    frame_rate: float = 8.0

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 4 or frames.shape[3] != 3:
            raise ValueError(f"clip frames must be (L, H, W, 3), got {frames.shape}")
        if frames.shape[0] < 1:
            raise ValueError("clip needs at least one frame")
        if not np.isfinite(frames).all():
            raise ValueError("clip contains non-finite values")
        if frames.min() < 0.0 or frames.max() > 1.0:
            raise ValueError("clip values must lie in [0, 1]")
        object.__setattr__(self, "frames", _freeze(frames))

    @property
    def length(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]


@dataclass(frozen=True)
class FlowField:
    """Per-frame dense displacement relative to frame 1, in pixels.

    flow has shape (L, H, W, 2) with channel order (dx, dy); flow[0] is zero.
    """

    flow: np.ndarray

    def __post_init__(self):
        flow = np.asarray(self.flow, dtype=np.float64)
        if flow.ndim != 4 or flow.shape[3] != 2:
            raise ValueError(f"flow must be (L, H, W, 2), got {flow.shape}")
        if not np.isfinite(flow).all():
            raise ValueError("flow contains non-finite values")
        if np.any(flow[0] != 0.0):
            raise ValueError("flow[0] (frame 1 relative to itself) must be zero")
        object.__setattr__(self, "flow", _freeze(flow))

    @property
    def length(self) -> int:
        return self.flow.shape[0]

    @property
    def height(self) -> int:
        return self.flow.shape[1]

    @property
    def width(self) -> int:
        return self.flow.shape[2]


@dataclass(frozen=True)
class BitMask2D:
    """An (H, W) binary mask."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {bits.shape}")
        if not np.isin(bits, (0, 1)).all():
            raise ValueError("mask must be binary")
        object.__setattr__(self, "bits", _freeze(bits.astype(np.uint8)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape


@dataclass(frozen=True)
class BitMaskSeq:
    """An (L, H, W) stack of binary masks, one per frame."""

    masks: np.ndarray

    def __post_init__(self):
        masks = np.asarray(self.masks)
        if masks.ndim != 3:
            raise ValueError(f"mask sequence must be 3-D, got shape {masks.shape}")
        if not np.isin(masks, (0, 1)).all():
            raise ValueError("mask sequence must be binary")
        object.__setattr__(self, "masks", _freeze(masks.astype(np.uint8)))

    @property
    def length(self) -> int:
        return self.masks.shape[0]


@dataclass(frozen=True)
class ScalarField:
    """An (H, W) real-valued field."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"scalar field must be 2-D, got shape {values.shape}")
        if not np.isfinite(values).all():
            raise ValueError("scalar field contains non-finite values")
        object.__setattr__(self, "values", _freeze(values))


def flow_magnitude_mean(flow: FlowField) -> ScalarField:
    """Per-pixel temporal mean of the flow magnitude: (1/L) * sum_i |flow_i|."""
    mags = np.sqrt(np.sum(flow.flow**2, axis=3))
    return ScalarField(mags.mean(axis=0))


def bilinear_sample(field: np.ndarray, x: float, y: float) -> np.ndarray:
    """Bilinear interpolation of an (H, W, C) field at (x, y), clamped at borders."""
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 3:
        raise ValueError(f"expected (H, W, C) field, got shape {field.shape}")
    return kernels.bilinear_map(field, np.array([x]), np.array([y]))[0]


def mask_and(a: BitMask2D, b: BitMask2D) -> BitMask2D:
    """Elementwise AND of two masks of equal shape."""
    if a.shape != b.shape:
        raise ValueError(f"mask shapes differ: {a.shape} vs {b.shape}")
    return BitMask2D(a.bits * b.bits)


# ---------------------------------------------------------------------------
# File formats


def encode_flo(flow_frame: np.ndarray) -> bytes:
    """One (H, W, 2) flow frame as Middlebury .flo bytes."""
    flow_frame = np.asarray(flow_frame, dtype=np.float32)
    if flow_frame.ndim != 3 or flow_frame.shape[2] != 2:
        raise ValueError(f"flow frame must be (H, W, 2), got {flow_frame.shape}")
    h, w = flow_frame.shape[:2]
    return struct.pack("<fii", FLO_MAGIC, w, h) + flow_frame.astype("<f4").tobytes()


def write_flo(path, flow_frame: np.ndarray) -> None:
    """Write one (H, W, 2) flow frame as a Middlebury .flo file."""
    with open(path, "wb") as f:
        f.write(encode_flo(flow_frame))


def read_flo(path) -> np.ndarray:
    """Read a Middlebury .flo file into an (H, W, 2) float64 array."""
    with open(path, "rb") as f:
        header = f.read(12)
        if len(header) != 12:
            raise ValueError(f"{path}: truncated .flo header")
        magic, w, h = struct.unpack("<fii", header)
        if abs(magic - FLO_MAGIC) > 1e-3:
            raise ValueError(f"{path}: bad .flo magic {magic!r}")
        data = np.frombuffer(f.read(w * h * 2 * 4), dtype="<f4")
    if data.size != w * h * 2:
        raise ValueError(f"{path}: truncated .flo payload")
    return data.reshape(h, w, 2).astype(np.float64)


def write_flow_field(directory, flow: FlowField, prefix: str = "flow") -> list:
    """Write every frame of a flow field as <prefix>_%04d.flo (1-based)."""
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(flow.length):
        p = directory / f"{prefix}_{i + 1:04d}.flo"
        write_flo(p, flow.flow[i])
        paths.append(p)
    return paths


def read_flow_field(directory, prefix: str = "flow") -> FlowField:
    """Read a directory of <prefix>_%04d.flo files back into a FlowField."""
    from pathlib import Path

    paths = sorted(Path(directory).glob(f"{prefix}_*.flo"))
    if not paths:
        raise ValueError(f"{directory}: no {prefix}_*.flo files found")
    return FlowField(np.stack([read_flo(p) for p in paths]))


def encode_pgm(mask: np.ndarray) -> bytes:
    """A binary mask as PGM P5 bytes (maxval 255; ones become 255)."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise ValueError(f"mask must be 2-D, got shape {mask.shape}")
    h, w = mask.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + (mask.astype(np.uint8) * 255).tobytes()


def write_pgm(path, mask: np.ndarray) -> None:
    """Write a binary mask as PGM P5 (maxval 255; ones become 255)."""
    with open(path, "wb") as f:
        f.write(encode_pgm(mask))


def _read_pnm_header(f, path):
    # Returns (magic, fields); skips '#' comments per the PNM spec.
    magic = f.read(2)
    fields = []
    while len(fields) < 3:
        line = f.readline()
        if not line:
            raise ValueError(f"{path}: truncated PNM header")
        text = line.split(b"#", 1)[0]
        fields.extend(int(tok) for tok in text.split())
    return magic, fields


def read_pgm(path) -> np.ndarray:
    """Read a PGM P5 file as a binary (H, W) uint8 mask (nonzero -> 1)."""
    with open(path, "rb") as f:
        magic, (w, h, maxval) = _read_pnm_header(f, path)
        if magic != b"P5":
            raise ValueError(f"{path}: not a binary PGM (magic {magic!r})")
        nbytes = 2 if maxval > 255 else 1
        data = np.frombuffer(f.read(w * h * nbytes), dtype=">u2" if nbytes == 2 else np.uint8)
    if data.size != w * h:
        raise ValueError(f"{path}: truncated PGM payload")
    return (data.reshape(h, w) != 0).astype(np.uint8)


def write_mask_seq(directory, seq: BitMaskSeq, prefix: str = "vis") -> list:
    """Write each frame of a mask sequence as <prefix>_%04d.pgm (1-based)."""
    from pathlib import Path

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(seq.masks.shape[0]):
        p = directory / f"{prefix}_{i + 1:04d}.pgm"
        write_pgm(p, seq.masks[i])
        paths.append(p)
    return paths


def read_mask_seq(directory, prefix: str = "vis") -> BitMaskSeq:
    from pathlib import Path

    paths = sorted(Path(directory).glob(f"{prefix}_*.pgm"))
    if not paths:
        raise ValueError(f"{directory}: no {prefix}_*.pgm files found")
    return BitMaskSeq(np.stack([read_pgm(p) for p in paths]))
