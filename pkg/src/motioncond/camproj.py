"""Camera-driven trajectory synthesis.

Pixels of frame 1 are lifted to 3D with a metric depth map and a pinhole
model, pushed through a camera pose sequence, and reprojected; the projected
positions form sparse tracks that feed the normal conditioning pipeline,
paired with an all-ones motion mask (camera motion moves everything).

Conventions: poses are camera-to-world with the frame-1 pose fixed to the
identity, matching the frame-1-relative flow convention everywhere else.
x right, y down, z forward; depth is in meters (PGM-16 depth files store
millimeters, PFM files store meters directly).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .condition import Track, TrackSet
from .grid import BitMask2D, _read_pnm_header

ORTHO_TOL = 1e-9
Z_EPS = 1e-9
DEFAULT_STRIDE = 16


@dataclass(frozen=True)
class DepthMap:
    depth: np.ndarray  # (H, W) meters

    def __post_init__(self):
        d = np.asarray(self.depth, dtype=np.float64)
        if d.ndim != 2:
            raise ValueError(f"depth must be 2D, got {d.shape}")
        if not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise ValueError("depth must be positive and finite everywhere")
        object.__setattr__(self, "depth", d)

    @property
    def shape(self):
        return self.depth.shape


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")


@dataclass(frozen=True)
class PoseSeq:
    """Camera-to-world rigid transforms; rotations (L, 3, 3), translations (L, 3)."""

    rotations: np.ndarray
    translations: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotations, dtype=np.float64)
        t = np.asarray(self.translations, dtype=np.float64)
        if r.ndim != 3 or r.shape[1:] != (3, 3) or t.shape != (r.shape[0], 3):
            raise ValueError(f"pose arrays must be (L, 3, 3) and (L, 3), got {r.shape}, {t.shape}")
        if r.shape[0] < 1:
            raise ValueError("pose sequence must not be empty")
        eye = np.eye(3)
        for i in range(r.shape[0]):
            if np.max(np.abs(r[i].T @ r[i] - eye)) > ORTHO_TOL:
                raise ValueError(f"pose {i}: rotation is not orthonormal")
            if np.linalg.det(r[i]) < 0:
                raise ValueError(f"pose {i}: rotation is a reflection (det < 0)")
        if np.max(np.abs(r[0] - eye)) > ORTHO_TOL or np.max(np.abs(t[0])) > ORTHO_TOL:
            raise ValueError("first pose must be the identity (frame-1-relative convention)")
        object.__setattr__(self, "rotations", r)
        object.__setattr__(self, "translations", t)

    @property
    def length(self) -> int:
        return self.rotations.shape[0]


def lift(pixels, depth: DepthMap, intr: Intrinsics) -> np.ndarray:
    """Back-project pixels to 3D in the frame-1 camera frame.

    X = (u - cx) Z / fx, Y = (v - cy) Z / fy, Z = depth at the pixel
    (nearest-neighbor depth lookup for fractional coordinates).
    """
    pts = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    h, w = depth.shape
    u, v = pts[:, 0], pts[:, 1]
    if np.any(u < 0) or np.any(u > w - 1) or np.any(v < 0) or np.any(v > h - 1):
        raise ValueError("pixel outside the depth map")
    z = depth.depth[np.rint(v).astype(np.int64), np.rint(u).astype(np.int64)]
    return np.stack([(u - intr.cx) * z / intr.fx, (v - intr.cy) * z / intr.fy, z], axis=1)


def _to_camera(points: np.ndarray, rot: np.ndarray, trans: np.ndarray) -> np.ndarray:
    return (points - trans) @ rot  # R^T (p - t) for row vectors


def project(points, rot: np.ndarray, trans: np.ndarray, intr: Intrinsics, z_eps: float = Z_EPS) -> np.ndarray:
    """Project world points through one camera-to-world pose."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    cam = _to_camera(pts, np.asarray(rot, dtype=np.float64), np.asarray(trans, dtype=np.float64))
    bad = np.nonzero(cam[:, 2] <= z_eps)[0]
    if bad.size:
        raise ValueError(f"point {int(bad[0])} is at or behind the camera plane (z={cam[bad[0], 2]:.3g})")
    u = intr.fx * cam[:, 0] / cam[:, 2] + intr.cx
    v = intr.fy * cam[:, 1] / cam[:, 2] + intr.cy
    return np.stack([u, v], axis=1)


@dataclass(frozen=True)
class CameraTrajectories:
    tracks: TrackSet
    mask: BitMask2D  # all ones
    dropped: int  # grid points discarded for crossing behind a camera


def pose_to_trajectories(
    depth: DepthMap, intr: Intrinsics, poses: PoseSeq, stride: int = DEFAULT_STRIDE
) -> CameraTrajectories:
    """Stride-spaced grid -> lift once -> project through every pose.

    Points that land at or behind any camera plane are dropped and counted;
    losing every point raises.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    h, w = depth.shape
    us = np.arange(stride // 2, w, stride, dtype=np.float64)
    vs = np.arange(stride // 2, h, stride, dtype=np.float64)
    grid = np.stack(np.meshgrid(us, vs), axis=-1).reshape(-1, 2)
    world = lift(grid, depth, intr)  # frame-1 camera frame == world frame
    n = poses.length
    positions = np.empty((grid.shape[0], n, 2), dtype=np.float64)
    valid = np.ones(grid.shape[0], dtype=bool)
    for i in range(n):
        cam = _to_camera(world, poses.rotations[i], poses.translations[i])
        ok = cam[:, 2] > Z_EPS
        valid &= ok
        z = np.where(ok, cam[:, 2], 1.0)  # placeholder depth for dropped rows
        positions[:, i, 0] = intr.fx * cam[:, 0] / z + intr.cx
        positions[:, i, 1] = intr.fy * cam[:, 1] / z + intr.cy
    dropped = int((~valid).sum())
    if not valid.any():
        raise ValueError(f"all {grid.shape[0]} grid points ended up behind a camera")
    tracks = TrackSet(tuple(Track(positions[j]) for j in np.nonzero(valid)[0]))
    return CameraTrajectories(tracks=tracks, mask=BitMask2D(np.ones((h, w), dtype=np.uint8)), dropped=dropped)


# ---------------------------------------------------------------------------
# Pose JSON and depth-file ingestion


def poses_to_json(poses: PoseSeq) -> dict:
    return {
        "poses": [
            {"R": poses.rotations[i].reshape(9).tolist(), "t": poses.translations[i].tolist()}
            for i in range(poses.length)
        ]
    }


def poses_from_json(d: dict) -> PoseSeq:
    entries = d.get("poses")
    if not entries:
        raise ValueError("pose JSON has no 'poses' array")
    rots, trans = [], []
    for i, e in enumerate(entries):
        r = np.asarray(e["R"], dtype=np.float64)
        if r.shape != (9,):
            raise ValueError(f"pose {i}: R must be 9 row-major floats")
        rots.append(r.reshape(3, 3))
        t = np.asarray(e["t"], dtype=np.float64)
        if t.shape != (3,):
            raise ValueError(f"pose {i}: t must be 3 floats")
        trans.append(t)
    return PoseSeq(np.stack(rots), np.stack(trans))


def load_poses(path) -> PoseSeq:
    with open(path) as f:
        return poses_from_json(json.load(f))


def save_poses(path, poses: PoseSeq) -> None:
    with open(path, "w") as f:
        json.dump(poses_to_json(poses), f, indent=2)
        f.write("\n")


def read_depth_pgm16(path) -> DepthMap:
    """16-bit PGM depth, big-endian words, values in millimeters."""
    with open(path, "rb") as f:
        magic, (width, height, maxval) = _read_pnm_header(f, path)
        if magic != b"P5":
            raise ValueError(f"{path}: not a binary PGM")
        if maxval < 256:
            raise ValueError(f"{path}: expected 16-bit samples, maxval={maxval}")
        data = f.read(width * height * 2)
        if len(data) != width * height * 2:
            raise ValueError(f"{path}: truncated pixel data")
    mm = np.frombuffer(data, dtype=">u2").reshape(height, width)
    return DepthMap(mm.astype(np.float64) / 1000.0)


def write_depth_pgm16(path, depth: DepthMap) -> None:
    mm = np.rint(depth.depth * 1000.0)
    if np.any(mm < 1) or np.any(mm > 65535):
        raise ValueError("depth out of range for 16-bit millimeter encoding")
    h, w = depth.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        f.write(mm.astype(">u2").tobytes())


def read_depth_pfm(path) -> DepthMap:
    """Grayscale PFM, rows stored bottom-up; negative scale = little-endian."""
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header != b"Pf":
            raise ValueError(f"{path}: not a grayscale PFM")
        dims = f.readline().split()
        if len(dims) != 2:
            raise ValueError(f"{path}: malformed PFM dimensions")
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline().strip())
        data = f.read(w * h * 4)
        if len(data) != w * h * 4:
            raise ValueError(f"{path}: truncated pixel data")
    dt = "<f4" if scale < 0 else ">f4"
    vals = np.frombuffer(data, dtype=dt).reshape(h, w)[::-1]
    return DepthMap(vals.astype(np.float64))


def write_depth_pfm(path, depth: DepthMap) -> None:
    h, w = depth.shape
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(depth.depth[::-1].astype("<f4").tobytes())
