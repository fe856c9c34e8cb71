"""Central-difference verification of hand-written gradients.

The op under test is a callable f(params) -> (loss, grads) over a dict of
float64 arrays. Every parameter element is perturbed by +/- eps and the
finite-difference slope is compared against the analytic gradient.

The error is relative where gradients are meaningfully sized and absolute
below the floor: err = |fd - g| / max(|fd|, |g|, floor). The floor keeps
truncation noise on near-zero gradients from masquerading as disagreement;
genuine formula bugs disagree at O(1) relative scale and are not hidden.
"""

from __future__ import annotations

import numpy as np


def grad_check(f, params: dict, eps: float = 1e-5, floor: float = 1e-4) -> float:
    """Max elementwise gradient error over all parameters.

    Mutates and restores params in place; f must be deterministic and free
    of caching across calls.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    _, grads = f(params)
    worst = 0.0
    for name in sorted(params):
        p = params[name]
        if p.dtype != np.float64:
            raise ValueError(f"{name}: gradient checks require float64 parameters")
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        if not p.flags["C_CONTIGUOUS"]:
            raise ValueError(f"{name}: parameter must be contiguous (reshape must alias)")
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + eps
            lp = f(params)[0]
            flat_p[i] = orig - eps
            lm = f(params)[0]
            flat_p[i] = orig
            fd = (lp - lm) / (2.0 * eps)
            err = abs(fd - flat_g[i]) / max(abs(fd), abs(flat_g[i]), floor)
            if err > worst:
                worst = err
    return float(worst)
