"""Training loop for the toy denoiser.

Single-threaded and seed-deterministic: one generator drives batch indices,
noise levels, and noise draws in a fixed order, so a (dataset, config) pair
reproduces its loss trace exactly. Batch losses are reduced with a fixed
summation order (numpy mean over the batch axis), which is the documented
deterministic-sum contract; evaluating batch elements in parallel is fine
only if that reduction order is preserved.

The fast path may run in float32; gradient checks always run a float64
model. Divergence (non-finite loss) aborts with the offending step index.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .denoiser import ToyConfig, ToyDenoiser, denoiser_apply, denoiser_grads, encode_latent
from .edm import EDMSchedule, lambda_sigma, sample_sigma


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    steps: int = 500
    batch_size: int = 4
    seed: int = 0
    lambda_rule: str = "edm"  # "edm" or "none"
    weight_decay: float = 1e-4
    dtype: str = "float64"  # "float32" allowed for the fast path
    schedule: EDMSchedule = field(default_factory=EDMSchedule)

    def __post_init__(self):
        if self.lr <= 0 or self.steps < 1 or self.batch_size < 1:
            raise ValueError("lr, steps, and batch_size must be positive")
        if self.lambda_rule not in ("edm", "none"):
            raise ValueError(f"lambda_rule must be 'edm' or 'none', got {self.lambda_rule!r}")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"dtype must be float64 or float32, got {self.dtype!r}")


class AdamW:
    """Decoupled weight decay Adam; state keyed by parameter name."""

    def __init__(self, lr: float, betas=(0.9, 0.999), eps: float = 1e-8, weight_decay: float = 0.0):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.wd = weight_decay
        self.t = 0
        self.m: dict = {}
        self.v: dict = {}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        bc1 = 1.0 - self.b1**self.t
        bc2 = 1.0 - self.b2**self.t
        for name, g in grads.items():
            p = params[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m += (1.0 - self.b1) * (g - m)
            v += (1.0 - self.b2) * (g * g - v)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p -= (self.lr * (update + self.wd * p)).astype(p.dtype, copy=False)


def _stack_dataset(dataset, dtype, zero_condition: bool):
    """Precompute latents and conditioning planes as contiguous batches."""
    if not dataset:
        raise ValueError("dataset must be nonempty")
    z0, ci, cx = [], [], []
    for clip, cond in dataset:
        frames = clip.frames if hasattr(clip, "frames") else np.asarray(clip, dtype=np.float64)
        lat = encode_latent(frames)
        z0.append(lat)
        ci.append(lat[0])
        cx.append(np.concatenate([cond.traj, cond.mask_seq.astype(np.float64)], axis=-1))
    z0 = np.stack(z0).astype(dtype)
    ci = np.stack(ci).astype(dtype)
    cx = np.stack(cx).astype(dtype)
    if zero_condition:
        cx = np.zeros_like(cx)
    return z0, ci, cx


def _batch_loss_grad(model, z0b, cib, cxb, sigma, noise, cfg):
    z = z0b + sigma.reshape(-1, 1, 1, 1, 1).astype(z0b.dtype) * noise
    zhat, cache = denoiser_apply(model, z, sigma, cib, cxb)
    diff = zhat - z0b
    numel = diff[0].size
    bs = diff.shape[0]
    if cfg.lambda_rule == "edm":
        w = lambda_sigma(sigma, cfg.schedule)
    else:
        w = np.ones_like(sigma)
    per = (diff.astype(np.float64) ** 2).reshape(bs, -1).mean(axis=1)
    loss = float(np.mean(w * per))
    dzhat = (2.0 / (bs * numel)) * w.reshape(-1, 1, 1, 1, 1) * diff
    return loss, dzhat.astype(model.dtype, copy=False), cache, zhat


def train_toy(
    dataset,
    cfg: TrainConfig,
    model_config: ToyConfig = ToyConfig(),
    model: ToyDenoiser | None = None,
    zero_condition: bool = False,
):
    """Fit the denoiser; returns (model, per-step loss list).

    dataset is a list of (clip, ConditionTensors) pairs; clips may be
    VideoClip objects or raw (L, H, W, 3) arrays. Pass a pre-initialized
    model to share weights across paired runs; zero_condition trains the
    control arm that never sees the conditioning signal.
    """
    dtype = np.dtype(cfg.dtype)
    z0, ci, cx = _stack_dataset(dataset, dtype, zero_condition)
    if model is None:
        model = ToyDenoiser.init(model_config, seed=cfg.seed, dtype=dtype)
    rng = np.random.default_rng(cfg.seed + 1)  # data order decoupled from init
    opt = AdamW(cfg.lr, weight_decay=cfg.weight_decay)
    nsamples = z0.shape[0]
    losses = []
    for step in range(cfg.steps):
        idx = rng.integers(0, nsamples, size=cfg.batch_size)
        sigma = sample_sigma(cfg.schedule, cfg.batch_size, rng)
        noise = rng.standard_normal(z0[idx].shape).astype(dtype)
        loss, dzhat, cache, _ = _batch_loss_grad(model, z0[idx], ci[idx], cx[idx], sigma, noise, cfg)
        if not np.isfinite(loss):
            raise RuntimeError(f"training diverged at step {step}: loss={loss}")
        grads = denoiser_grads(model, dzhat, cache)
        opt.step(model.params, grads)
        losses.append(loss)
    return model, losses


def validation_loss(
    dataset,
    model: ToyDenoiser,
    cfg: TrainConfig,
    seed: int,
    zero_condition: bool = False,
    draws: int = 4,
    chunk: int = 16,
) -> float:
    """Deterministic held-out DSM loss: `draws` noise levels per sample.

    All randomness comes from `seed`, so paired models see identical
    (sigma, noise) evaluations.
    """
    dtype = np.dtype(cfg.dtype)
    z0, ci, cx = _stack_dataset(dataset, dtype, zero_condition)
    rng = np.random.default_rng(seed)
    n = z0.shape[0]
    total = 0.0
    count = 0
    for _ in range(draws):
        sigma = sample_sigma(cfg.schedule, n, rng)
        noise = rng.standard_normal(z0.shape).astype(dtype)
        for lo in range(0, n, chunk):
            hi = min(lo + chunk, n)
            loss, _, _, _ = _batch_loss_grad(
                model, z0[lo:hi], ci[lo:hi], cx[lo:hi], sigma[lo:hi], noise[lo:hi], cfg
            )
            total += loss * (hi - lo)
            count += hi - lo
    return total / count


def load_train_config(path) -> tuple:
    """Read (TrainConfig, ToyConfig) from a TOML file.

    Sections: [train] lr/steps/batch/seed/lambda_rule/weight_decay/dtype,
    [schedule] sigma_data/p_mean/p_std, [model] c1/c2/enc_width/groups/
    lora_rank. All keys optional; defaults fill the gaps.
    """
    with open(Path(path), "rb") as f:
        doc = tomllib.load(f)
    tr = doc.get("train", {})
    sc = doc.get("schedule", {})
    mo = doc.get("model", {})
    sched = EDMSchedule(
        sigma_data=float(sc.get("sigma_data", 0.5)),
        p_mean=float(sc.get("p_mean", -1.2)),
        p_std=float(sc.get("p_std", 1.2)),
    )
    cfg = TrainConfig(
        lr=float(tr.get("lr", 1e-3)),
        steps=int(tr.get("steps", 500)),
        batch_size=int(tr.get("batch", 4)),
        seed=int(tr.get("seed", 0)),
        lambda_rule=str(tr.get("lambda_rule", "edm")),
        weight_decay=float(tr.get("weight_decay", 1e-4)),
        dtype=str(tr.get("dtype", "float64")),
        schedule=sched,
    )
    model_cfg = ToyConfig(
        c1=int(mo.get("c1", 8)),
        c2=int(mo.get("c2", 12)),
        enc_width=int(mo.get("enc_width", 8)),
        groups=int(mo.get("groups", 4)),
        lora_rank=int(mo.get("lora_rank", 32)),
    )
    return cfg, model_cfg
