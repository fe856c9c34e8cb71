"""Motion encoder: conditioning tensors in, per-scale (gamma, beta) out.

The encoder eats the 3-channel concatenation (trajectory x, trajectory y,
motion mask) at pixel resolution and strides down by 2 three times: twice to
reach the latent grid (the codec pools by 4) and once more for the coarse
scale. One space-time conv head per scale emits 2x the latent channel count,
split into (gamma, beta). Heads start exactly zero, so a fresh encoder
modulates nothing and the denoiser ignores its conditioning until training
moves the head weights.

The parameter-dict keys enc0/enc1/enc2 (stacks) and head1/head2 (heads)
constitute the encoder's parameters inside a model's flat dict.
"""

from __future__ import annotations

import numpy as np

from .layers import conv3d_backward, conv3d_forward, silu_backward, silu_forward

ENCODER_PREFIXES = ("enc0", "enc1", "enc2", "head1", "head2")


def init_encoder_params(enc_width: int, c1: int, c2: int, rng: np.random.Generator, dtype) -> dict:
    e = enc_width
    k3 = 27

    def conv_init(cin, cout):
        scale = np.sqrt(2.0 / (k3 * cin))
        return (rng.standard_normal((3, 3, 3, cin, cout)) * scale).astype(dtype)

    return {
        "enc0.w": conv_init(3, e),
        "enc0.b": np.zeros(e, dtype=dtype),
        "enc1.w": conv_init(e, e),
        "enc1.b": np.zeros(e, dtype=dtype),
        "enc2.w": conv_init(e, e),
        "enc2.b": np.zeros(e, dtype=dtype),
        # scale/bias heads: exactly zero so initial modulation is a no-op
        "head1.w": np.zeros((3, 3, 3, e, 2 * c1), dtype=dtype),
        "head1.b": np.zeros(2 * c1, dtype=dtype),
        "head2.w": np.zeros((3, 3, 3, e, 2 * c2), dtype=dtype),
        "head2.b": np.zeros(2 * c2, dtype=dtype),
    }


def encoder_apply(params: dict, cond_x: np.ndarray):
    """cond_x (B, L, H, W, 3) -> ((gamma1, beta1), (gamma2, beta2), cache).

    Scale 1 lives at (H/4, W/4) with 2*c1 head channels, scale 2 at
    (H/8, W/8) with 2*c2.
    """
    if cond_x.ndim != 5 or cond_x.shape[4] != 3:
        raise ValueError(f"conditioning input must be (B, L, H, W, 3), got {cond_x.shape}")
    a0, c0 = conv3d_forward(cond_x, params["enc0.w"], params["enc0.b"], stride=2)
    e0, s0 = silu_forward(a0)
    a1, c1_ = conv3d_forward(e0, params["enc1.w"], params["enc1.b"], stride=2)
    e1, s1 = silu_forward(a1)
    gb1, ch1 = conv3d_forward(e1, params["head1.w"], params["head1.b"], stride=1)
    a2, c2_ = conv3d_forward(e1, params["enc2.w"], params["enc2.b"], stride=2)
    e2, s2 = silu_forward(a2)
    gb2, ch2 = conv3d_forward(e2, params["head2.w"], params["head2.b"], stride=1)
    n1 = gb1.shape[4] // 2
    n2 = gb2.shape[4] // 2
    out = ((gb1[..., :n1], gb1[..., n1:]), (gb2[..., :n2], gb2[..., n2:]))
    cache = (c0, s0, c1_, s1, ch1, c2_, s2, ch2)
    return out, cache


def encoder_backward(dgb: tuple, cache) -> dict:
    """Gradients for all encoder params from per-scale (dgamma, dbeta)."""
    (dg1, db1), (dg2, db2) = dgb
    c0, s0, c1_, s1, ch1, c2_, s2, ch2 = cache
    grads = {}
    dgb1 = np.concatenate([dg1, db1], axis=-1)
    dgb2 = np.concatenate([dg2, db2], axis=-1)
    de2, grads["head2.w"], grads["head2.b"] = conv3d_backward(dgb2, ch2)
    da2 = silu_backward(de2, s2)
    de1_a, grads["enc2.w"], grads["enc2.b"] = conv3d_backward(da2, c2_)
    de1_b, grads["head1.w"], grads["head1.b"] = conv3d_backward(dgb1, ch1)
    da1 = silu_backward(de1_a + de1_b, s1)
    de0, grads["enc1.w"], grads["enc1.b"] = conv3d_backward(da1, c1_)
    da0 = silu_backward(de0, s0)
    _, grads["enc0.w"], grads["enc0.b"] = conv3d_backward(da0, c0)
    return grads


def encoder_forward(params: dict, cond) -> tuple:
    """Single-sample wrapper; cond is ConditionTensors or an (L, H, W, 3) array."""
    if hasattr(cond, "traj"):
        x = np.concatenate([cond.traj, cond.mask_seq.astype(np.float64)], axis=-1)
    else:
        x = np.asarray(cond, dtype=np.float64)
    (gb1, gb2), _ = encoder_apply(params, x[None])
    return (gb1[0][0], gb1[1][0]), (gb2[0][0], gb2[1][0])
