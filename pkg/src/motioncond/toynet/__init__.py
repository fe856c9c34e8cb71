"""Toy conditioned denoiser: numpy forward/backward, no autograd framework.

Submodules:
  edm        noise schedule, preconditioning coefficients, DSM loss
  layers     space-time convs, group norm, SiLU, feature modulation
  lora       low-rank adapters for the channel-mixing linear maps
  encoder    motion encoder emitting per-scale scale/bias pairs
  denoiser   the two-scale conditioned denoiser and its latent codec
  train      AdamW training loop, TOML config, validation loss
  checkpoint binary named-tensor container
  gradcheck  central-difference verification of hand-written gradients
"""

from .edm import EDMSchedule, add_noise, dsm_loss, edm_precondition, lambda_sigma, sample_sigma
from .lora import LoRAAdapter, lora_delta, lora_fuse
from .layers import group_norm, modulate
from .encoder import encoder_forward
from .denoiser import ToyConfig, ToyDenoiser, decode_latent, denoiser_forward, encode_latent
from .train import TrainConfig, load_train_config, train_toy, validation_loss
from .checkpoint import load_checkpoint, load_denoiser, save_checkpoint, save_denoiser
from .gradcheck import grad_check

__all__ = [
    "EDMSchedule", "add_noise", "dsm_loss", "edm_precondition", "lambda_sigma", "sample_sigma",
    "LoRAAdapter", "lora_delta", "lora_fuse",
    "group_norm", "modulate",
    "encoder_forward",
    "ToyConfig", "ToyDenoiser", "decode_latent", "denoiser_forward", "encode_latent",
    "TrainConfig", "load_train_config", "train_toy", "validation_loss",
    "load_checkpoint", "load_denoiser", "save_checkpoint", "save_denoiser",
    "grad_check",
]
