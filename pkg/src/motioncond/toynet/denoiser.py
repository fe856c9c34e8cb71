"""Two-scale conditioned denoiser over pooled latents.

The latent codec is an average-pool by 4 with nearest-neighbor decode (a
stand-in for a learned autoencoder; invertibility is not needed to study the
conditioning mechanics). Latents are centered to [-0.5, 0.5] so their scale
matches the schedule's sigma_data = 0.5.

Network layout (channels-last, latent resolution h = H/4):

    x = concat(c_in * z, first-frame latent tiled over L, c_noise)   7 ch
    h1 = SiLU(GN(conv stride 1))                                     c1
    h1m = GN(h1) * gamma1 + beta1 + h1        <- modulation, scale 1
    m1 = channel mix (LoRA-fused)                                    c1
    h2 = SiLU(GN(conv stride 2))                                     c2
    h2m = GN(h2) * gamma2 + beta2 + h2        <- modulation, scale 2
    m2 = channel mix (LoRA-fused)                                    c2
    u = nearest-upsample(m2) concat m1                               c1+c2
    f = SiLU(GN(conv stride 1))                                      c1
    F = conv stride 1                                                3 ch
    zhat = c_skip * z + c_out * F

(gamma, beta) pairs come from the motion encoder; both are zero at init, so
a fresh model's output is exactly independent of the conditioning input.
The modulation is injected at both scales; with two scales there is no
deeper choice to make.

All parameters live in one flat name -> array dict. The LoRA factors of the
two channel mixers are trained jointly with the base weights: the forward
fuses W' = W + A B^T and the backward routes dW' to W, A, and B.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..condition import ConditionTensors
from .edm import EDMSchedule, edm_precondition
from .encoder import encoder_apply, encoder_backward, init_encoder_params
from .layers import (
    avg_pool_forward,
    channel_linear_backward,
    channel_linear_forward,
    conv3d_backward,
    conv3d_forward,
    group_norm_backward,
    group_norm_forward,
    modulate_backward,
    modulate_forward,
    nn_upsample_backward,
    nn_upsample_forward,
    silu_backward,
    silu_forward,
)

POOL = 4  # codec factor: pixel canvas to latent grid
LATENT_CHANNELS = 3


@dataclass(frozen=True)
class ToyConfig:
    c1: int = 8
    c2: int = 12
    enc_width: int = 8
    groups: int = 4
    lora_rank: int = 32

    def __post_init__(self):
        for name, c in (("c1", self.c1), ("c2", self.c2), ("c1+c2", self.c1 + self.c2)):
            if c % self.groups:
                raise ValueError(f"{name}={c} not divisible by groups={self.groups}")
        if self.lora_rank < 1:
            raise ValueError("lora_rank must be >= 1")


class ToyDenoiser:
    """Flat parameter dict + config; weights mutate in place during training."""

    def __init__(self, config: ToyConfig, params: dict, dtype=np.float64):
        self.config = config
        self.params = params
        self.dtype = np.dtype(dtype)

    @classmethod
    def init(cls, config: ToyConfig = ToyConfig(), seed: int = 0, dtype=np.float64) -> "ToyDenoiser":
        rng = np.random.default_rng(seed)
        dt = np.dtype(dtype)
        c1, c2 = config.c1, config.c2

        def conv_init(cin, cout, scale=None):
            s = np.sqrt(2.0 / (27 * cin)) if scale is None else scale
            return (rng.standard_normal((3, 3, 3, cin, cout)) * s).astype(dt)

        def mix_init(c):
            return (rng.standard_normal((c, c)) / np.sqrt(c)).astype(dt)

        r1 = min(config.lora_rank, c1)
        r2 = min(config.lora_rank, c2)
        params = {
            "conv1.w": conv_init(7, c1),
            "conv1.b": np.zeros(c1, dtype=dt),
            "mix1.w": mix_init(c1),
            "mix1.b": np.zeros(c1, dtype=dt),
            "mix1.lora_a": (rng.standard_normal((c1, r1)) / np.sqrt(r1)).astype(dt),
            "mix1.lora_b": np.zeros((c1, r1), dtype=dt),
            "down.w": conv_init(c1, c2),
            "down.b": np.zeros(c2, dtype=dt),
            "mix2.w": mix_init(c2),
            "mix2.b": np.zeros(c2, dtype=dt),
            "mix2.lora_a": (rng.standard_normal((c2, r2)) / np.sqrt(r2)).astype(dt),
            "mix2.lora_b": np.zeros((c2, r2), dtype=dt),
            "conv3.w": conv_init(c1 + c2, c1),
            "conv3.b": np.zeros(c1, dtype=dt),
            "out.w": conv_init(c1, LATENT_CHANNELS, scale=1e-2),
            "out.b": np.zeros(LATENT_CHANNELS, dtype=dt),
        }
        params.update(init_encoder_params(config.enc_width, c1, c2, rng, dt))
        return cls(config, params, dtype=dt)

    def copy(self) -> "ToyDenoiser":
        return ToyDenoiser(self.config, {k: v.copy() for k, v in self.params.items()}, self.dtype)


def encode_latent(frames: np.ndarray) -> np.ndarray:
    """(L, H, W, 3) RGB in [0, 1] -> centered latent (L, H/4, W/4, 3)."""
    x = np.asarray(frames, dtype=np.float64)
    y, _ = avg_pool_forward(x[None], POOL)
    return y[0] - 0.5


def decode_latent(z: np.ndarray) -> np.ndarray:
    """Nearest-neighbor expansion back to pixel resolution, clipped to [0, 1]."""
    z = np.asarray(z, dtype=np.float64)
    y, _ = nn_upsample_forward(z[None], POOL)
    return np.clip(y[0] + 0.5, 0.0, 1.0)


def _fused_mix(params: dict, name: str):
    return params[f"{name}.w"] + params[f"{name}.lora_a"] @ params[f"{name}.lora_b"].T


def denoiser_apply(model: ToyDenoiser, z: np.ndarray, sigma: np.ndarray, c_i: np.ndarray, cond_x: np.ndarray):
    """Batched raw forward.

    z (B, L, h, w, 3), sigma (B,) all > 0, c_i (B, h, w, 3) frame-1 latents,
    cond_x (B, L, 4h, 4w, 3). Returns (zhat, cache).
    """
    p = model.params
    g = model.config.groups
    bs, n, h, w, _ = z.shape
    sigma = np.asarray(sigma, dtype=np.float64)
    c_skip, c_out, c_in, c_noise = (c.astype(model.dtype) for c in edm_precondition(sigma))
    z = np.asarray(z, dtype=model.dtype)
    c_i = np.asarray(c_i, dtype=model.dtype)
    bc = (bs, 1, 1, 1, 1)
    x = np.concatenate(
        [
            c_in.reshape(bc) * z,
            np.broadcast_to(c_i[:, None], (bs, n, h, w, 3)),
            np.broadcast_to(c_noise.reshape(bc), (bs, n, h, w, 1)),
        ],
        axis=-1,
    )

    (gb1, gb2), enc_cache = encoder_apply(p, cond_x.astype(model.dtype))
    a1, cc1 = conv3d_forward(x, p["conv1.w"], p["conv1.b"], stride=1)
    n1, cg1 = group_norm_forward(a1, g)
    h1, cs1 = silu_forward(n1)
    h1m, cm1 = modulate_forward(h1, gb1[0], gb1[1], g)
    w1 = _fused_mix(p, "mix1")
    m1, cl1 = channel_linear_forward(h1m, w1, p["mix1.b"])

    a2, cc2 = conv3d_forward(m1, p["down.w"], p["down.b"], stride=2)
    n2, cg2 = group_norm_forward(a2, g)
    h2, cs2 = silu_forward(n2)
    h2m, cm2 = modulate_forward(h2, gb2[0], gb2[1], g)
    w2 = _fused_mix(p, "mix2")
    m2, cl2 = channel_linear_forward(h2m, w2, p["mix2.b"])

    u, cu = nn_upsample_forward(m2, 2)
    cat = np.concatenate([m1, u], axis=-1)
    a3, cc3 = conv3d_forward(cat, p["conv3.w"], p["conv3.b"], stride=1)
    n3, cg3 = group_norm_forward(a3, g)
    f, cs3 = silu_forward(n3)
    raw, cc4 = conv3d_forward(f, p["out.w"], p["out.b"], stride=1)

    zhat = c_skip.reshape(bc) * z + c_out.reshape(bc) * raw
    cache = (
        enc_cache, cc1, cg1, cs1, cm1, cl1, cc2, cg2, cs2, cm2, cl2,
        cu, cc3, cg3, cs3, cc4, c_out.reshape(bc), model.config.c1,
    )
    return zhat, cache


def denoiser_grads(model: ToyDenoiser, dzhat: np.ndarray, cache) -> dict:
    """Parameter gradients for a batched forward; inputs are not differentiated."""
    p = model.params
    (
        enc_cache, cc1, cg1, cs1, cm1, cl1, cc2, cg2, cs2, cm2, cl2,
        cu, cc3, cg3, cs3, cc4, c_out, c1,
    ) = cache
    grads = {}
    draw = dzhat * c_out
    df, grads["out.w"], grads["out.b"] = conv3d_backward(draw, cc4)
    dn3 = silu_backward(df, cs3)
    da3 = group_norm_backward(dn3, cg3)
    dcat, grads["conv3.w"], grads["conv3.b"] = conv3d_backward(da3, cc3)
    dm1 = dcat[..., :c1].copy()
    du = dcat[..., c1:]
    dm2 = nn_upsample_backward(du, cu)

    dh2m, dw2f, grads["mix2.b"] = channel_linear_backward(dm2, cl2)
    grads["mix2.w"] = dw2f
    grads["mix2.lora_a"] = dw2f @ p["mix2.lora_b"]
    grads["mix2.lora_b"] = dw2f.T @ p["mix2.lora_a"]
    dh2, dg2, db2 = modulate_backward(dh2m, cm2)
    dn2 = silu_backward(dh2, cs2)
    da2 = group_norm_backward(dn2, cg2)
    dm1_b, grads["down.w"], grads["down.b"] = conv3d_backward(da2, cc2)
    dm1 += dm1_b

    dh1m, dw1f, grads["mix1.b"] = channel_linear_backward(dm1, cl1)
    grads["mix1.w"] = dw1f
    grads["mix1.lora_a"] = dw1f @ p["mix1.lora_b"]
    grads["mix1.lora_b"] = dw1f.T @ p["mix1.lora_a"]
    dh1, dg1, db1 = modulate_backward(dh1m, cm1)
    dn1 = silu_backward(dh1, cs1)
    da1 = group_norm_backward(dn1, cg1)
    _, grads["conv1.w"], grads["conv1.b"] = conv3d_backward(da1, cc1)

    grads.update(encoder_backward(((dg1, db1), (dg2, db2)), enc_cache))
    return grads


def denoiser_forward(model: ToyDenoiser, z: np.ndarray, sigma: float, c_i: np.ndarray, cond) -> np.ndarray:
    """Single-sample prediction of the clean latent.

    sigma = 0 short-circuits to z itself (the preconditioning limit: skip
    weight 1, output weight 0), so the network never sees ln(0).
    """
    z = np.asarray(z, dtype=np.float64)
    if sigma < 0:
        raise ValueError("noise level must be nonnegative")
    if sigma == 0:
        return z.copy()
    if isinstance(cond, ConditionTensors):
        cond_x = np.concatenate([cond.traj, cond.mask_seq.astype(np.float64)], axis=-1)
    else:
        cond_x = np.asarray(cond, dtype=np.float64)
    expect = (z.shape[0], z.shape[1] * POOL, z.shape[2] * POOL, 3)
    if cond_x.shape != expect:
        raise ValueError(f"conditioning {cond_x.shape} does not match latent {z.shape}: want {expect}")
    zhat, _ = denoiser_apply(
        model, z[None], np.array([sigma]), np.asarray(c_i, dtype=np.float64)[None], cond_x[None]
    )
    return zhat[0]
