"""Synthetic scenes with analytic ground truth.

A scene is a constant-color background plus anti-aliased disc blobs moving
on parametric paths. Because blob colors are flat and discs are isotropic,
flow, visibility, and point tracks all have closed forms, which makes these
scenes the testing oracle for the whole conditioning pipeline.

Motion semantics:
  * velocity: rigid translation, center_t = center_0 + v * t.
  * arc: rigid rotation about a fixed pivot; every point of the blob
    follows p_t = pivot + R(omega * t) * (p - pivot).
  * waypoints: rigid translation along a polyline visited uniformly in
    time over the clip.
Frame indices here are 0-based: the first frame is t = 0 and has zero flow.

The background's velocity contributes to ground truth flow but not to
rendering (the background is a flat color, so a pan is photometrically
invisible); this keeps appearance and flow independently controllable.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .condition import Track, TrackSet
from .grid import BitMaskSeq, FlowField, VideoClip

SUPERSAMPLE = 4  # per-axis subsamples for disc coverage


@dataclass(frozen=True)
class VelocityMotion:
    velocity: tuple[float, float]


@dataclass(frozen=True)
class ArcMotion:
    center: tuple[float, float]  # pivot of the rotation, px
    omega: float  # angular rate, radians per frame


@dataclass(frozen=True)
class WaypointMotion:
    points: tuple[tuple[float, float], ...]  # visited after the start, uniform in time


Motion = VelocityMotion | ArcMotion | WaypointMotion


@dataclass(frozen=True)
class Blob:
    center: tuple[float, float]  # frame-1 center, px
    radius: float
    color: tuple[float, float, float]
    motion: Motion = VelocityMotion((0.0, 0.0))

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("blob radius must be positive")


@dataclass(frozen=True)
class Background:
    color: tuple[float, float, float] = (0.0, 0.0, 0.0)
    velocity: tuple[float, float] = (0.0, 0.0)


@dataclass(frozen=True)
class SceneSpec:
    """Parametric scene: canvas size, background, blobs, and a seed."""

    length: int
    height: int
    width: int
    background: Background = field(default_factory=Background)
    blobs: tuple[Blob, ...] = ()
    seed: int = 0
    frame_rate: float = 8.0

    def __post_init__(self):
        if self.length < 2:
            raise ValueError("scene needs at least 2 frames")
        if self.height < 1 or self.width < 1:
            raise ValueError("canvas must be at least 1x1")


@dataclass(frozen=True)
class GroundTruth:
    """Analytic flow and visibility for a scene; tracks come from oracle_track."""

    spec: SceneSpec
    flow: FlowField
    visibility: BitMaskSeq

    def track(self, points) -> TrackSet:
        return oracle_track(self.spec, points)


def _rotate_about(p: np.ndarray, pivot: np.ndarray, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    d = p - pivot
    return pivot + np.array([c * d[0] - s * d[1], s * d[0] + c * d[1]])


def _displace_point(blob: Blob, p: np.ndarray, t: float, length: int) -> np.ndarray:
    """Displacement of a blob-owned point p from frame 1 to 0-based frame t."""
    m = blob.motion
    if isinstance(m, ArcMotion):
        pivot = np.array(m.center, dtype=np.float64)
        return _rotate_about(p, pivot, m.omega * t) - p
    return _blob_center_timed(blob, t, length) - np.array(blob.center, dtype=np.float64)


def _blob_center_timed(blob: Blob, t: float, length: int) -> np.ndarray:
    c0 = np.array(blob.center, dtype=np.float64)
    m = blob.motion
    if isinstance(m, VelocityMotion):
        return c0 + np.array(m.velocity) * t
    if isinstance(m, ArcMotion):
        return _rotate_about(c0, np.array(m.center, dtype=np.float64), m.omega * t)
    if isinstance(m, WaypointMotion):
        pts = np.concatenate([c0[None, :], np.asarray(m.points, dtype=np.float64)], axis=0)
        nseg = len(pts) - 1
        if nseg == 0 or length < 2:
            return pts[0]
        s = np.clip(t / (length - 1), 0.0, 1.0) * nseg
        seg = min(int(np.floor(s)), nseg - 1)
        frac = s - seg
        return pts[seg] * (1.0 - frac) + pts[seg + 1] * frac
    raise TypeError(f"unknown motion {m!r}")


def render_clip(spec: SceneSpec) -> VideoClip:
    """Rasterize the scene: flat background, anti-aliased discs, back-to-front."""
    h, w = spec.height, spec.width
    frames = np.empty((spec.length, h, w, 3), dtype=np.float64)
    offs = (np.arange(SUPERSAMPLE) + 0.5) / SUPERSAMPLE - 0.5
    sub_y = (np.arange(h)[:, None] + offs[None, :]).ravel()  # (h*S,)
    sub_x = (np.arange(w)[:, None] + offs[None, :]).ravel()
    for t in range(spec.length):
        frame = np.empty((h, w, 3), dtype=np.float64)
        frame[:] = np.asarray(spec.background.color)
        for blob in spec.blobs:
            cx, cy = _blob_center_timed(blob, float(t), spec.length)
            dy2 = (sub_y - cy) ** 2
            dx2 = (sub_x - cx) ** 2
            inside = dy2[:, None] + dx2[None, :] <= blob.radius**2
            cov = inside.reshape(h, SUPERSAMPLE, w, SUPERSAMPLE).mean(axis=(1, 3))
            frame = frame * (1.0 - cov[:, :, None]) + np.asarray(blob.color) * cov[:, :, None]
        frames[t] = frame
    return VideoClip(np.clip(frames, 0.0, 1.0), frame_rate=spec.frame_rate)


def _owner_index(spec: SceneSpec, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Topmost blob whose disc contains each point at frame 1; -1 = background."""
    owner = np.full(xs.shape, -1, dtype=np.int64)
    for b, blob in enumerate(spec.blobs):
        cx, cy = blob.center
        inside = (xs - cx) ** 2 + (ys - cy) ** 2 <= blob.radius**2
        owner[inside] = b
    return owner


VIS_MARGIN = 2.0  # px; covers the bilinear support plus the anti-aliased rim


def _pair_consistent(
    spec: SceneSpec, ax, ay, bx, by, disp: np.ndarray, t: int, aligned=None
) -> np.ndarray:
    """Where frame-1 content at (ax, ay) provably equals frame-t content at
    (bx, by) = (ax, ay) + disp, within VIS_MARGIN of bilinear slack.

    Walks the blobs top-down. A disc that translates by exactly the pixel's
    own integral displacement keeps its anti-aliased blend aligned on both
    sides, so it is transparent to the comparison unless it covers the point
    outright. Any other disc must sit deep over both points (its flat color
    wins on both sides) or stay clear of both; anything near an edge is
    unreliable. Reaching the flat background is always consistent.

    `aligned` masks out pixels whose pair is no longer offset by exactly
    disp (border clamping); the co-translation shortcut is unsound there.
    """
    n, m = spec.length, VIS_MARGIN
    settled = np.zeros(ax.shape, dtype=bool)
    bad = np.zeros(ax.shape, dtype=bool)
    d_int = (disp[:, :, 0] == np.rint(disp[:, :, 0])) & (disp[:, :, 1] == np.rint(disp[:, :, 1]))
    if aligned is not None:
        d_int = d_int & aligned
    for b in range(len(spec.blobs) - 1, -1, -1):
        blob = spec.blobs[b]
        c1 = np.asarray(blob.center, dtype=np.float64)
        ct = _blob_center_timed(blob, float(t), n)
        shift = ct - c1
        exempt = d_int & (disp[:, :, 0] == shift[0]) & (disp[:, :, 1] == shift[1])
        da = np.hypot(ax - c1[0], ay - c1[1])
        db = np.hypot(bx - ct[0], by - ct[1])
        deep = (da <= blob.radius - m) & (db <= blob.radius - m)
        clear = (da >= blob.radius + m) & (db >= blob.radius + m)
        active = ~settled & ~bad
        stop = deep | (exempt & (da <= blob.radius - m))
        settled |= active & stop
        bad |= active & ~stop & ~clear & ~exempt
    return ~bad


def ground_truth(spec: SceneSpec) -> GroundTruth:
    """Analytic frame-1-relative flow and per-frame visibility.

    A frame-1 pixel's flow follows the scene element covering it (topmost
    disc by center-in-disc test, else background).

    Visibility is conservative: a pixel p with displacement d counts as
    visible at frame t only while the flow provably transports appearance,
    meaning p + d stays in canvas and the content pairs (p -> p + d) and
    (clamp(p - d) -> p) are consistent per _pair_consistent; the second pair
    mirrors what a backward warp samples. In particular a pixel covered by
    a different, higher-drawn blob at frame t goes invisible, as does
    anything near a moving disc edge where anti-aliased blends change.
    Fully static content (and content co-translating with the pixel on an
    exact pixel grid) stays visible everywhere, so a static scene keeps an
    all-ones mask.
    """
    h, w, n = spec.height, spec.width, spec.length
    gy, gx = np.mgrid[0:h, 0:w]
    xs = gx.astype(np.float64)
    ys = gy.astype(np.float64)
    owner = _owner_index(spec, xs, ys)

    flow = np.zeros((n, h, w, 2), dtype=np.float64)
    vis = np.ones((n, h, w), dtype=np.uint8)
    bg_v = np.asarray(spec.background.velocity, dtype=np.float64)
    for t in range(1, n):
        disp = np.empty((h, w, 2), dtype=np.float64)
        disp[:, :, 0] = bg_v[0] * t
        disp[:, :, 1] = bg_v[1] * t
        for b, blob in enumerate(spec.blobs):
            sel = owner == b
            if not sel.any():
                continue
            if isinstance(blob.motion, ArcMotion):
                pivot = np.array(blob.motion.center, dtype=np.float64)
                ang = blob.motion.omega * t
                c, s = np.cos(ang), np.sin(ang)
                dx = xs[sel] - pivot[0]
                dy = ys[sel] - pivot[1]
                disp[sel, 0] = pivot[0] + c * dx - s * dy - xs[sel]
                disp[sel, 1] = pivot[1] + s * dx + c * dy - ys[sel]
            else:
                d = _blob_center_timed(blob, float(t), n) - np.asarray(blob.center)
                disp[sel] = d
        mx = xs + disp[:, :, 0]
        my = ys + disp[:, :, 1]
        sx = np.clip(xs - disp[:, :, 0], 0.0, w - 1.0)
        sy = np.clip(ys - disp[:, :, 1], 0.0, h - 1.0)
        aligned = (sx == xs - disp[:, :, 0]) & (sy == ys - disp[:, :, 1])
        visible = (mx >= 0) & (mx <= w - 1) & (my >= 0) & (my <= h - 1)
        visible &= _pair_consistent(spec, xs, ys, mx, my, disp, t)
        visible &= _pair_consistent(spec, sx, sy, xs, ys, disp, t, aligned)
        vis[t] = visible.astype(np.uint8)
        flow[t, :, :, 0] = disp[:, :, 0]
        flow[t, :, :, 1] = disp[:, :, 1]
    return GroundTruth(spec=spec, flow=FlowField(flow), visibility=BitMaskSeq(vis))


def oracle_track(spec: SceneSpec, points) -> TrackSet:
    """Analytic trajectories of frame-1 points through every frame."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    h, w = spec.height, spec.width
    if np.any(pts[:, 0] < 0) or np.any(pts[:, 0] > w - 1) or np.any(pts[:, 1] < 0) or np.any(pts[:, 1] > h - 1):
        raise ValueError("query points must lie within frame-1 bounds")
    owner = _owner_index(spec, pts[:, 0], pts[:, 1])
    tracks = []
    for p, b in zip(pts, owner):
        positions = np.empty((spec.length, 2), dtype=np.float64)
        for t in range(spec.length):
            if b < 0:
                disp = np.asarray(spec.background.velocity, dtype=np.float64) * t
            else:
                disp = _displace_point(spec.blobs[b], p, float(t), spec.length)
            positions[t] = p + disp
        tracks.append(Track(positions))
    return TrackSet(tuple(tracks))


# ---------------------------------------------------------------------------
# Scene JSON (version 1) and PNG frame export


def _motion_to_json(m: Motion) -> dict:
    if isinstance(m, VelocityMotion):
        return {"kind": "velocity", "velocity": list(m.velocity)}
    if isinstance(m, ArcMotion):
        return {"kind": "arc", "center": list(m.center), "omega": m.omega}
    if isinstance(m, WaypointMotion):
        return {"kind": "waypoints", "points": [list(p) for p in m.points]}
    raise TypeError(f"unknown motion {m!r}")


def _motion_from_json(d: dict) -> Motion:
    kind = d.get("kind")
    if kind == "velocity":
        return VelocityMotion(tuple(d["velocity"]))
    if kind == "arc":
        return ArcMotion(tuple(d["center"]), float(d["omega"]))
    if kind == "waypoints":
        return WaypointMotion(tuple(tuple(p) for p in d["points"]))
    raise ValueError(f"unknown motion kind {kind!r}")


def scene_to_json(spec: SceneSpec) -> dict:
    return {
        "version": 1,
        "canvas": {"frames": spec.length, "height": spec.height, "width": spec.width},
        "frame_rate": spec.frame_rate,
        "seed": spec.seed,
        "background": {
            "color": list(spec.background.color),
            "velocity": list(spec.background.velocity),
        },
        "blobs": [
            {
                "center": list(b.center),
                "radius": b.radius,
                "color": list(b.color),
                "motion": _motion_to_json(b.motion),
            }
            for b in spec.blobs
        ],
    }


def scene_from_json(d: dict) -> SceneSpec:
    try:
        canvas = d["canvas"]
        bg = d.get("background", {})
        return SceneSpec(
            length=int(canvas["frames"]),
            height=int(canvas["height"]),
            width=int(canvas["width"]),
            background=Background(
                color=tuple(bg.get("color", (0.0, 0.0, 0.0))),
                velocity=tuple(bg.get("velocity", (0.0, 0.0))),
            ),
            blobs=tuple(
                Blob(
                    center=tuple(b["center"]),
                    radius=float(b["radius"]),
                    color=tuple(b["color"]),
                    motion=_motion_from_json(b["motion"]),
                )
                for b in d.get("blobs", ())
            ),
            seed=int(d.get("seed", 0)),
            frame_rate=float(d.get("frame_rate", 8.0)),
        )
    except KeyError as e:
        raise ValueError(f"scene JSON missing field {e.args[0]!r}") from None


def load_scene(path) -> SceneSpec:
    with open(path) as f:
        return scene_from_json(json.load(f))


def save_scene(path, spec: SceneSpec) -> None:
    with open(path, "w") as f:
        json.dump(scene_to_json(spec), f, indent=2)
        f.write("\n")


def encode_frame_png(frame: np.ndarray) -> bytes:
    """One [0, 1] RGB frame as PNG bytes (rounded to 8 bits)."""
    img = np.clip(np.rint(np.asarray(frame) * 255.0), 0, 255).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(img).save(buf, format="PNG")
    return buf.getvalue()


def write_frames(directory, clip: VideoClip, prefix: str = "frame") -> list:
    """Export clip frames as <prefix>_%04d.png (1-based)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(clip.length):
        p = directory / f"{prefix}_{i + 1:04d}.png"
        p.write_bytes(encode_frame_png(clip.frames[i]))
        paths.append(p)
    return paths


def read_frames(directory, prefix: str = "frame", frame_rate: float = 8.0) -> VideoClip:
    directory = Path(directory)
    paths = sorted(directory.glob(f"{prefix}_*.png"))
    if not paths:
        raise ValueError(f"{directory}: no {prefix}_*.png frames found")
    frames = [np.asarray(Image.open(p).convert("RGB"), dtype=np.float64) / 255.0 for p in paths]
    return VideoClip(np.stack(frames), frame_rate=frame_rate)


def read_frame(path) -> np.ndarray:
    """Single PNG as an (H, W, 3) float64 array in [0, 1]."""
    return np.asarray(Image.open(path).convert("RGB"), dtype=np.float64) / 255.0
