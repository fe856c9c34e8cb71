"""Trajectory-conditioned video tooling at desk scale.

Modules:
  grid       dense field containers and their file formats
  synth      synthetic disc scenes with analytic flow/visibility/tracks
  condition  flow + visibility (or strokes + brush) -> condition tensors
  propagate  sparse-to-dense trajectory interpolation and warp previews
  toynet     a small trainable denoiser exercising the conditioning hooks
  metrics    motion alignment and appearance consistency scores
  camproj    depth + camera poses -> pixel trajectories
  kernels    compiled inner loops with a pure-numpy fallback
  cli        batch entry point (`motioncond ...`)
  serve      session HTTP service for the annotation UI
"""

from .grid import BitMask2D, BitMaskSeq, FlowField, ScalarField, VideoClip
from .condition import (
    ConditionTensors,
    RegionSelectionMask,
    SamplerConfig,
    Track,
    TrackSet,
    make_training_condition,
    rasterize_user_trajectory,
)
from .propagate import densify, warp_clip
from .synth import SceneSpec, ground_truth, render_clip

__version__ = "0.1.0"

__all__ = [
    "BitMask2D",
    "BitMaskSeq",
    "ConditionTensors",
    "FlowField",
    "RegionSelectionMask",
    "SamplerConfig",
    "ScalarField",
    "SceneSpec",
    "Track",
    "TrackSet",
    "VideoClip",
    "__version__",
    "densify",
    "ground_truth",
    "make_training_condition",
    "rasterize_user_trajectory",
    "render_clip",
    "warp_clip",
]
