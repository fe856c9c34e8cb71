"""Low-rank adapters: W' = W + A @ B^T.

A is (d_out, r), B is (d_in, r). Initialization follows the usual recipe
(A gaussian, B zero) so the delta starts at exactly zero and the fused map
equals the base map until training moves B.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LoRAAdapter:
    A: np.ndarray  # (d_out, r)
    B: np.ndarray  # (d_in, r)

    def __post_init__(self):
        a = np.asarray(self.A, dtype=np.float64)
        b = np.asarray(self.B, dtype=np.float64)
        if a.ndim != 2 or b.ndim != 2:
            raise ValueError("adapter factors must be matrices")
        if a.shape[1] != b.shape[1]:
            raise ValueError(f"rank mismatch: A has {a.shape[1]}, B has {b.shape[1]}")
        r = a.shape[1]
        if r < 1:
            raise ValueError("rank must be >= 1")
        if r > min(a.shape[0], b.shape[0]):
            raise ValueError(f"rank {r} exceeds min(d_out, d_in) = {min(a.shape[0], b.shape[0])}")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)

    @property
    def rank(self) -> int:
        return self.A.shape[1]


def init_adapter(d_out: int, d_in: int, rank: int, rng: np.random.Generator) -> LoRAAdapter:
    """Rank is clamped to min(d_out, d_in); delta is zero at init (B = 0)."""
    r = min(rank, d_out, d_in)
    a = rng.standard_normal((d_out, r)) / np.sqrt(r)
    return LoRAAdapter(A=a, B=np.zeros((d_in, r)))


def lora_delta(adapter: LoRAAdapter) -> np.ndarray:
    return adapter.A @ adapter.B.T


def lora_fuse(w: np.ndarray, adapter: LoRAAdapter) -> np.ndarray:
    """Fused weights W + A @ B^T; shapes must agree exactly."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (adapter.A.shape[0], adapter.B.shape[0]):
        raise ValueError(
            f"weight {w.shape} does not match adapter ({adapter.A.shape[0]}, {adapter.B.shape[0]})"
        )
    return w + lora_delta(adapter)
