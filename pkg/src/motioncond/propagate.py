"""Deterministic preview: densify sparse trajectories, warp the first frame.

This is a stand-in for the generative model so the annotation loop and the
alignment metrics can run end to end at desk scale. Densification is
inverse-distance-weighted interpolation of the trajectory displacements over
the motion mask; the clip preview is a backward warp of the reference frame
by the negated dense flow. Backward warping is total (no holes) but is an
approximation that degrades under large rotations.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .condition import ConditionTensors
from .grid import FlowField, VideoClip

IDW_POWER = 2.0


def densify(cond: ConditionTensors, power: float = IDW_POWER) -> FlowField:
    """Interpolate nonzero trajectory displacements across the motion mask.

    Data sites are the pixels carrying a nonzero displacement in any frame
    (frame 1 is all zeros by construction and contributes none on its own).
    The field is exact at the sites, IDW elsewhere inside the mask, and zero
    outside. A nonempty mask with no sites at all is unrecoverable and
    raises: the motion region is unconstrained.
    """
    traj = cond.traj
    mask = cond.mask_seq[0, :, :, 0]
    n, h, w, _ = traj.shape
    site_mask = np.any(traj != 0.0, axis=(0, 3))  # (H, W), nonzero in any frame
    sy, sx = np.nonzero(site_mask)
    if mask.any() and sy.size == 0:
        raise ValueError("unconstrained motion region: mask is nonempty but no trajectory is")
    dense = np.zeros((n, h, w, 2), dtype=np.float64)
    if sy.size == 0:
        return FlowField(dense)
    for i in range(1, n):
        dense[i] = kernels.idw_densify(
            sx.astype(np.float64),
            sy.astype(np.float64),
            np.ascontiguousarray(traj[i, sy, sx, :]),
            mask,
            power,
        )
    return FlowField(dense)


def warp_clip(first: np.ndarray, dense: FlowField) -> VideoClip:
    """Backward-warp the reference frame along the dense flow.

    Frame i at pixel p samples the reference at p - dense[i](p); border
    samples clamp. Frame 1's zero flow reproduces the reference exactly.
    """
    first = np.asarray(first, dtype=np.float64)
    n, h, w, _ = dense.flow.shape
    if first.shape != (h, w, 3):
        raise ValueError(f"first frame {first.shape} does not match flow {(h, w)}")
    frames = np.empty((n, h, w, 3), dtype=np.float64)
    for i in range(n):
        if not dense.flow[i].any():
            frames[i] = first
            continue
        frames[i] = kernels.backward_warp(first, dense.flow[i])
    return VideoClip(np.clip(frames, 0.0, 1.0))
