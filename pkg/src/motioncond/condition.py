"""Motion conditioning signals.

Turns dense flow + per-frame visibility (the training path) or user strokes +
a brush mask (the inference path) into the two tensors that condition video
synthesis: a region-wise sparse trajectory field (L, H, W, 2) and a motion
mask sequence (L, H, W, 1).

Training pipeline, in order:
  1. global visibility = per-pixel product of the L visibility masks,
  2. masked flow = flow * global visibility,
  3. random region selection on the k x k grid (mask ratio r_m drawn
     uniformly from [r_min, 1.0]; each region kept with prob 1 - r_m),
  4. trajectory field = masked flow * padded selection mask,
  5. motion mask = mean flow magnitude over frames > threshold, repeated L
     times.

The selection draw consumes the seeded generator in a fixed order (first the
ratio, then the per-region coin flips), so a (seed, shape) pair fully
determines the output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import (
    BitMask2D,
    BitMaskSeq,
    FlowField,
    _freeze,
    flow_magnitude_mean,
    read_flow_field,
    read_pgm,
    write_flow_field,
    write_pgm,
)


@dataclass(frozen=True)
class Track:
    """One point's trajectory: (L, 2) positions in px, frame 1 first."""

    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 1:
            raise ValueError(f"track positions must be (L, 2), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise ValueError("track positions must be finite")
        object.__setattr__(self, "positions", _freeze(pos))

    @property
    def start(self) -> np.ndarray:
        return self.positions[0]

    @property
    def length(self) -> int:
        return self.positions.shape[0]

    def displacements(self) -> np.ndarray:
        return self.positions - self.positions[0]


@dataclass(frozen=True)
class TrackSet:
    tracks: tuple

    def __post_init__(self):
        tracks = tuple(self.tracks)
        if tracks:
            lengths = {t.length for t in tracks}
            if len(lengths) != 1:
                raise ValueError(f"tracks disagree on length: {sorted(lengths)}")
        object.__setattr__(self, "tracks", tracks)

    def __len__(self) -> int:
        return len(self.tracks)

    def __iter__(self):
        return iter(self.tracks)

    @property
    def length(self) -> int:
        if not self.tracks:
            raise ValueError("empty track set has no frame count")
        return self.tracks[0].length

    def positions_array(self) -> np.ndarray:
        """(N, L, 2) stack of all track positions."""
        if not self.tracks:
            return np.zeros((0, 0, 2))
        return np.stack([t.positions for t in self.tracks])


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs for region selection and motion-mask thresholding.

    ratio_mode picks how the drawn ratio r_m is read: "masked" (default)
    treats it as the fraction of regions masked OUT, so regions survive with
    probability 1 - r_m; "keep" treats it as the surviving fraction directly.
    """

    k: int = 8
    r_min: float = 0.95
    threshold: float = 1.0
    seed: int = 0
    ratio_mode: str = "masked"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("region size k must be >= 1")
        if not 0.0 <= self.r_min <= 1.0:
            raise ValueError("r_min must lie in [0, 1]")
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if self.ratio_mode not in ("masked", "keep"):
            raise ValueError(f"ratio_mode must be 'masked' or 'keep', got {self.ratio_mode!r}")


@dataclass(frozen=True)
class RegionSelectionMask:
    """Binary grid over k x k regions; r_m is the realized mask ratio draw."""

    bits: np.ndarray
    k: int
    r_m: float

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise ValueError(f"region bits must be 2D, got {bits.shape}")
        if not np.isin(bits, (0, 1)).all():
            raise ValueError("region bits must be binary")
        if self.k < 1:
            raise ValueError("region size k must be >= 1")
        object.__setattr__(self, "bits", _freeze(bits.astype(np.uint8)))


@dataclass(frozen=True)
class ConditionTensors:
    """The model-facing pair: traj (L, H, W, 2) px and mask_seq (L, H, W, 1).

    traj carries frame-1-relative displacements only inside selected regions
    that survived visibility masking; mask_seq is one motion mask repeated
    along the time axis.
    """

    traj: np.ndarray
    mask_seq: np.ndarray

    def __post_init__(self):
        traj = np.asarray(self.traj, dtype=np.float64)
        mask = np.asarray(self.mask_seq)
        if traj.ndim != 4 or traj.shape[3] != 2:
            raise ValueError(f"traj must be (L, H, W, 2), got {traj.shape}")
        if mask.shape != traj.shape[:3] + (1,):
            raise ValueError(f"mask_seq shape {mask.shape} does not match traj {traj.shape}")
        if not np.all(np.isfinite(traj)):
            raise ValueError("traj must be finite")
        if np.any(traj[0] != 0.0):
            raise ValueError("traj frame 1 must be all zeros (displacements are frame-1-relative)")
        if not np.isin(mask, (0, 1)).all():
            raise ValueError("mask_seq must be binary")
        if mask.shape[0] > 1 and np.any(mask != mask[0:1]):
            raise ValueError("mask_seq must be constant along the time axis")
        object.__setattr__(self, "traj", _freeze(traj))
        object.__setattr__(self, "mask_seq", _freeze(mask.astype(np.uint8)))

    @property
    def length(self) -> int:
        return self.traj.shape[0]


def global_visibility(vis: BitMaskSeq) -> BitMask2D:
    """Per-pixel product of all L masks: 1 iff visible in every frame."""
    return BitMask2D(np.multiply.reduce(vis.masks, axis=0))


def mask_flow(flow: FlowField, mg: BitMask2D) -> FlowField:
    if flow.flow.shape[1:3] != mg.bits.shape:
        raise ValueError(f"flow {flow.flow.shape[1:3]} vs mask {mg.bits.shape} shape mismatch")
    return FlowField(flow.flow * mg.bits[None, :, :, None])


def sample_region_mask(hk: int, wk: int, cfg: SamplerConfig) -> RegionSelectionMask:
    """Draw r_m ~ U[r_min, 1], then keep each region i.i.d. with prob 1 - r_m.

    Under ratio_mode="keep" the survival probability is r_m itself.
    """
    if hk < 1 or wk < 1:
        raise ValueError("region grid must be at least 1x1")
    rng = np.random.default_rng(cfg.seed)
    r_m = float(rng.uniform(cfg.r_min, 1.0))
    p_keep = r_m if cfg.ratio_mode == "keep" else 1.0 - r_m
    bits = (rng.random((hk, wk)) < p_keep).astype(np.uint8)
    return RegionSelectionMask(bits=bits, k=cfg.k, r_m=r_m)


def pad_region_mask(msel: RegionSelectionMask) -> BitMask2D:
    """Replicate each region bit over its k x k pixel block."""
    k = msel.k
    return BitMask2D(np.repeat(np.repeat(msel.bits, k, axis=0), k, axis=1))


def region_trajectories(masked_flow: FlowField, msel: RegionSelectionMask) -> np.ndarray:
    """Trajectory tensor: masked flow kept only inside selected regions."""
    n, h, w, _ = masked_flow.flow.shape
    hk, wk = msel.bits.shape
    if h != hk * msel.k or w != wk * msel.k:
        raise ValueError(
            f"canvas {h}x{w} does not tile into {hk}x{wk} regions of size {msel.k}"
        )
    padded = pad_region_mask(msel).bits
    return masked_flow.flow * padded[None, :, :, None]


def motion_mask(flow: FlowField, cfg: SamplerConfig) -> BitMask2D:
    """1 where the temporal mean of per-frame flow magnitude exceeds threshold."""
    f_avg = flow_magnitude_mean(flow)
    return BitMask2D((f_avg.values > cfg.threshold).astype(np.uint8))


def repeat_motion_mask(m: BitMask2D, length: int) -> BitMaskSeq:
    if length < 1:
        raise ValueError("sequence length must be >= 1")
    return BitMaskSeq(np.repeat(m.bits[None, :, :], length, axis=0))


def make_training_condition(flow: FlowField, vis: BitMaskSeq, cfg: SamplerConfig) -> ConditionTensors:
    """Full training-side pipeline; equals composing the component ops."""
    n, h, w, _ = flow.flow.shape
    if vis.masks.shape != (n, h, w):
        raise ValueError(f"visibility {vis.masks.shape} does not match flow {(n, h, w)}")
    if h % cfg.k or w % cfg.k:
        raise ValueError(f"canvas {h}x{w} not divisible by region size k={cfg.k}")
    mg = global_visibility(vis)
    fm = mask_flow(flow, mg)
    msel = sample_region_mask(h // cfg.k, w // cfg.k, cfg)
    traj = region_trajectories(fm, msel)
    mseq = repeat_motion_mask(motion_mask(flow, cfg), n)
    return ConditionTensors(traj=traj, mask_seq=mseq.masks[:, :, :, None])


def resample_polyline(points, length: int) -> np.ndarray:
    """Resample a polyline to `length` points, uniform in arc length.

    A single point (or zero total length) resamples to `length` copies of
    the first point, i.e. a static drag.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise ValueError("empty stroke")
    if length < 2:
        raise ValueError("need at least 2 output points")
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if cum[-1] == 0.0:
        return np.repeat(pts[:1], length, axis=0)
    targets = np.linspace(0.0, cum[-1], length)
    out = np.empty((length, 2), dtype=np.float64)
    out[:, 0] = np.interp(targets, cum, pts[:, 0])
    out[:, 1] = np.interp(targets, cum, pts[:, 1])
    return out


def tracks_from_strokes(strokes, length: int) -> TrackSet:
    """Resample each stroke polyline into a length-L track."""
    return TrackSet(tuple(Track(resample_polyline(s, length)) for s in strokes))


def rasterize_user_trajectory(strokes, length: int, k: int, brush: BitMask2D) -> ConditionTensors:
    """Inference-side conditioning from stroke polylines and a brush mask.

    Each stroke is arc-length-resampled to L points; its per-frame
    displacement is painted over the k-aligned k x k block containing the
    stroke's start point (strokes sharing a block overwrite in input order).
    mask_seq is the brush repeated L times.
    """
    h, w = brush.shape
    if h % k or w % k:
        raise ValueError(f"brush canvas {h}x{w} not divisible by region size k={k}")
    if not strokes:
        raise ValueError("empty stroke")
    traj = np.zeros((length, h, w, 2), dtype=np.float64)
    for stroke in strokes:
        positions = resample_polyline(stroke, length)
        if (
            positions[:, 0].min() < 0
            or positions[:, 0].max() > w - 1
            or positions[:, 1].min() < 0
            or positions[:, 1].max() > h - 1
        ):
            raise ValueError("stroke leaves the canvas")
        disp = positions - positions[0]
        col = int(positions[0, 0]) // k
        row = int(positions[0, 1]) // k
        traj[:, row * k : (row + 1) * k, col * k : (col + 1) * k, :] = disp[:, None, None, :]
    mask_seq = np.repeat(brush.bits[None, :, :, None], length, axis=0)
    return ConditionTensors(traj=traj, mask_seq=mask_seq)


# ---------------------------------------------------------------------------
# Trajectory JSON and condition-tensor files


def trackset_to_json(ts: TrackSet) -> dict:
    return {
        "version": 1,
        "L": ts.length,
        "tracks": [{"points": t.positions.tolist()} for t in ts.tracks],
    }


def trackset_from_json(d: dict) -> TrackSet:
    if d.get("version") != 1:
        raise ValueError(f"unsupported trajectory JSON version {d.get('version')!r}")
    length = int(d["L"])
    tracks = []
    for i, entry in enumerate(d.get("tracks", ())):
        pts = np.asarray(entry["points"], dtype=np.float64)
        if pts.shape != (length, 2):
            raise ValueError(f"track {i} has shape {pts.shape}, expected ({length}, 2)")
        tracks.append(Track(pts))
    return TrackSet(tuple(tracks))


def load_tracks(path) -> TrackSet:
    with open(path) as f:
        return trackset_from_json(json.load(f))


def save_tracks(path, ts: TrackSet) -> None:
    with open(path, "w") as f:
        json.dump(trackset_to_json(ts), f)
        f.write("\n")


def save_condition(directory, cond: ConditionTensors) -> None:
    """Write traj as per-frame flow files plus the motion mask as PGM."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_flow_field(directory, FlowField(cond.traj), prefix="traj")
    write_pgm(directory / "mask.pgm", cond.mask_seq[0, :, :, 0])


def load_condition(directory) -> ConditionTensors:
    directory = Path(directory)
    traj = read_flow_field(directory, prefix="traj")
    mask = read_pgm(directory / "mask.pgm")
    if mask.shape != traj.flow.shape[1:3]:
        raise ValueError(f"mask {mask.shape} does not match trajectories {traj.flow.shape[1:3]}")
    mask_seq = np.repeat(mask[None, :, :, None], traj.flow.shape[0], axis=0)
    return ConditionTensors(traj=traj.flow, mask_seq=mask_seq)
