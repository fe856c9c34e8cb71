"""Trajectory-alignment and quality metrics.

Desk-scale backends stand in for the heavyweight models the protocols
normally lean on: an 8x8x8 RGB color histogram replaces learned frame
features, and a block matcher (or a flow-field reader) replaces learned
point tracking. The interfaces take any embedder/tracker object, so
externally computed features or tracks can be plugged in unchanged.

Protocol notes:
  * md_img matches frame 1 against each later frame independently and
    averages over frames 2..L (frame 1 would contribute an identical-image
    match of zero and dilute the score).
  * md_vid tracks through the whole clip and averages over all L frames,
    frame 1's exact zero included.
  * frame_consistency is the mean cosine similarity of adjacent frame
    pairs, one score per clip (all-pairs averaging is a plausible reading
    of the protocol; adjacent-pair is the one implemented).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .condition import Track, TrackSet
from .grid import FlowField, VideoClip

PATCH = 9  # block-matching patch edge, px
RADIUS = 8  # per-step search radius, px


class HistogramEmbedder:
    """8x8x8 RGB color histogram, L2-normalized to a unit vector."""

    def __init__(self, bins: int = 8):
        if bins < 1:
            raise ValueError("bins must be >= 1")
        self.bins = bins

    def embed(self, frame: np.ndarray) -> np.ndarray:
        frame = np.asarray(frame, dtype=np.float64)
        idx = np.minimum((frame * self.bins).astype(np.int64), self.bins - 1)
        flat = (idx[..., 0] * self.bins + idx[..., 1]) * self.bins + idx[..., 2]
        hist = np.bincount(flat.ravel(), minlength=self.bins**3).astype(np.float64)
        return hist / np.linalg.norm(hist)


def _patch_at(frame: np.ndarray, cx: float, cy: float, size: int) -> np.ndarray:
    """Bilinear patch of `size` x `size` centered at (cx, cy), border-clamped."""
    half = (size - 1) / 2.0
    offs = np.arange(size) - half
    xs = (cx + offs)[None, :].repeat(size, axis=0).ravel()
    ys = (cy + offs)[:, None].repeat(size, axis=1).ravel()
    vals = kernels.bilinear_map(frame, xs, ys)
    return vals.reshape(size, size, frame.shape[2])


@dataclass(frozen=True)
class FlowTracker:
    """Reads tracks straight off a flow field: p_i = p + flow[i](p).

    With a scene's analytic flow this is the oracle backend; with a dense
    preview flow it measures what the preview actually did.
    """

    flow: FlowField

    def track(self, clip, points) -> TrackSet:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        n, h, w, _ = self.flow.flow.shape
        stacked = np.ascontiguousarray(self.flow.flow.transpose(1, 2, 0, 3).reshape(h, w, n * 2))
        disp = kernels.bilinear_map(stacked, pts[:, 0], pts[:, 1]).reshape(-1, n, 2)
        return TrackSet(tuple(Track(p[None, :] + d) for p, d in zip(pts, disp)))


@dataclass(frozen=True)
class BlockMatchTracker:
    """Sequential block matching with drift correction.

    The template is always the frame-1 patch around the query point; each
    frame's search window is centered on the previous frame's estimate, so
    the tracker follows motion up to `radius` px per frame while matching
    against frame 1 keeps it from accumulating drift.
    """

    patch: int = PATCH
    radius: int = RADIUS
    cost_floor: float = 0.25  # mean squared color error above this = lost

    def track_with_flags(self, clip: VideoClip, points):
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        n = clip.length
        per_px = self.patch * self.patch * clip.frames.shape[3]
        tracks = np.empty((pts.shape[0], n, 2), dtype=np.float64)
        ok = np.ones(pts.shape[0], dtype=bool)
        for j, p in enumerate(pts):
            template = _patch_at(clip.frames[0], p[0], p[1], self.patch)
            tracks[j, 0] = p
            cx, cy = int(round(p[0])), int(round(p[1]))
            for i in range(1, n):
                cx, cy, cost = kernels.block_match(template, clip.frames[i], cx, cy, self.radius)
                tracks[j, i] = (cx, cy)
                if cost / per_px > self.cost_floor:
                    ok[j] = False
        return TrackSet(tuple(Track(t) for t in tracks)), ok

    def track(self, clip: VideoClip, points) -> TrackSet:
        ts, _ = self.track_with_flags(clip, points)
        return ts


@dataclass(frozen=True)
class TrackerCorrespond:
    """Adapts a whole-clip tracker to the pairwise-correspondence interface."""

    tracker: object

    def correspond(self, clip: VideoClip, points):
        ts = self.tracker.track(clip, points)
        pos = ts.positions_array()  # (N, L, 2)
        return pos, np.ones(pos.shape[0], dtype=bool)


@dataclass(frozen=True)
class BlockMatchCorrespond:
    """Frame-1-to-frame-i matching, each frame searched independently.

    The search stays centered on the frame-1 point, so the radius bounds the
    total displacement it can find (unlike the sequential tracker, whose
    radius bounds per-frame steps).
    """

    patch: int = PATCH
    radius: int = 2 * RADIUS
    cost_floor: float = 0.25

    def correspond(self, clip: VideoClip, points):
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        n = clip.length
        per_px = self.patch * self.patch * clip.frames.shape[3]
        pos = np.empty((pts.shape[0], n, 2), dtype=np.float64)
        ok = np.ones(pts.shape[0], dtype=bool)
        for j, p in enumerate(pts):
            template = _patch_at(clip.frames[0], p[0], p[1], self.patch)
            pos[j, 0] = p
            cx, cy = int(round(p[0])), int(round(p[1]))
            for i in range(1, n):
                x, y, cost = kernels.block_match(template, clip.frames[i], cx, cy, self.radius)
                pos[j, i] = (x, y)
                if cost / per_px > self.cost_floor:
                    ok[j] = False
        return pos, ok


@dataclass(frozen=True)
class MDResult:
    """Mean distance in px plus the indices of excluded (lost) points."""

    value: float
    excluded: tuple

    def __float__(self) -> float:
        return self.value


def _md_common(reference: TrackSet, positions: np.ndarray, ok: np.ndarray, first_frame: int) -> MDResult:
    ref = reference.positions_array()  # (N, L, 2)
    if positions.shape != ref.shape:
        raise ValueError(f"tracked positions {positions.shape} do not match reference {ref.shape}")
    excluded = tuple(int(i) for i in np.nonzero(~ok)[0])
    keep = np.nonzero(ok)[0]
    if keep.size == 0:
        raise ValueError("every point was excluded by the correspondence backend")
    dist = np.linalg.norm(positions[keep] - ref[keep], axis=2)  # (kept, L)
    return MDResult(value=float(dist[:, first_frame:].mean()), excluded=excluded)


def md_img(reference: TrackSet, clip: VideoClip, correspond) -> MDResult:
    """Frame-level mean distance: independent frame-1-to-frame-i matches."""
    if reference.length != clip.length:
        raise ValueError(f"reference length {reference.length} != clip length {clip.length}")
    starts = np.stack([t.start for t in reference.tracks])
    positions, ok = correspond.correspond(clip, starts)
    return _md_common(reference, positions, ok, first_frame=1)


def md_vid(reference: TrackSet, clip: VideoClip, tracker) -> MDResult:
    """Video-level mean distance: full tracks, all L frames averaged."""
    if reference.length != clip.length:
        raise ValueError(f"reference length {reference.length} != clip length {clip.length}")
    starts = np.stack([t.start for t in reference.tracks])
    if hasattr(tracker, "track_with_flags"):
        ts, ok = tracker.track_with_flags(clip, starts)
    else:
        ts = tracker.track(clip, starts)
        ok = np.ones(len(ts), dtype=bool)
    return _md_common(reference, ts.positions_array(), ok, first_frame=0)


def frame_consistency(clip: VideoClip, emb=None) -> float:
    """Mean cosine similarity of adjacent frame embeddings."""
    if clip.length < 2:
        raise ValueError("frame consistency needs at least 2 frames")
    emb = emb if emb is not None else HistogramEmbedder()
    vecs = np.stack([emb.embed(f) for f in clip.frames])
    return frame_consistency_vectors(vecs)


def frame_consistency_vectors(vecs: np.ndarray) -> float:
    """frame_consistency on precomputed per-frame vectors, one row per frame.

    Rows are normalized here, so external embeddings need not be unit length.
    """
    vecs = np.asarray(vecs, dtype=np.float64)
    if vecs.ndim != 2 or vecs.shape[0] < 2:
        raise ValueError(f"need a (L>=2, D) vector array, got shape {vecs.shape}")
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm embedding row")
    unit = vecs / norms
    sims = np.sum(unit[:-1] * unit[1:], axis=1)
    return float(sims.mean())


def avg_flow_magnitude(flow: FlowField) -> float:
    """Mean per-step displacement: frame-to-frame differences of the
    frame-1-relative flow, averaged over all pixels and transitions."""
    steps = np.diff(flow.flow, axis=0)  # (L-1, H, W, 2)
    if steps.shape[0] == 0:
        return 0.0
    return float(np.linalg.norm(steps, axis=3).mean())
