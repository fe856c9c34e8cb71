"""Numpy layers with hand-written backward passes.

Every array is channels-last. Internal functions take a leading batch axis:
conv inputs are (B, L, H, W, C). Forward functions return (out, cache);
backward functions take (grad_out, cache). Caches hold exactly what the
backward needs, nothing more.

Convolutions are 3x3x3 space-time kernels, zero same-padding, stride 1 in
time and a spatial stride of 1 or 2; spatial dims must divide by the stride.
Group norm uses biased variance and carries no affine of its own (the
modulation path supplies scale and bias).
"""

from __future__ import annotations

import numpy as np

EPS = 1e-5
KSIZE = 3  # cubic kernel edge


def _pad_stv(x: np.ndarray) -> np.ndarray:
    return np.pad(x, ((0, 0), (1, 1), (1, 1), (1, 1), (0, 0)))


def conv3d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 1):
    """x (B,L,H,W,Cin), w (3,3,3,Cin,Cout), b (Cout,) -> (B,L,H/s,W/s,Cout)."""
    bs, n, h, wd, cin = x.shape
    if h % stride or wd % stride:
        raise ValueError(f"spatial dims {h}x{wd} not divisible by stride {stride}")
    cout = w.shape[4]
    xp = _pad_stv(x)
    win = np.lib.stride_tricks.sliding_window_view(xp, (KSIZE, KSIZE, KSIZE), axis=(1, 2, 3))
    win = win[:, :, ::stride, ::stride]  # (B, L, Ho, Wo, Cin, 3, 3, 3)
    ho, wo = h // stride, wd // stride
    cols = np.ascontiguousarray(win.transpose(0, 1, 2, 3, 5, 6, 7, 4)).reshape(
        bs * n * ho * wo, KSIZE**3 * cin
    )
    wmat = w.reshape(KSIZE**3 * cin, cout)
    y = (cols @ wmat + b).reshape(bs, n, ho, wo, cout)
    cache = (cols, wmat, x.shape, stride, w.shape)
    return y, cache


def conv3d_backward(dy: np.ndarray, cache):
    cols, wmat, xshape, stride, wshape = cache
    bs, n, h, wd, cin = xshape
    ho, wo = h // stride, wd // stride
    cout = wshape[4]
    dyf = dy.reshape(bs * n * ho * wo, cout)
    dw = (cols.T @ dyf).reshape(wshape)
    db = dyf.sum(axis=0)
    dcols = (dyf @ wmat.T).reshape(bs, n, ho, wo, KSIZE, KSIZE, KSIZE, cin)
    dxp = np.zeros((bs, n + 2, h + 2, wd + 2, cin), dtype=dy.dtype)
    for kt in range(KSIZE):
        for ky in range(KSIZE):
            for kx in range(KSIZE):
                dxp[
                    :,
                    kt : kt + n,
                    ky : ky + stride * ho : stride,
                    kx : kx + stride * wo : stride,
                    :,
                ] += dcols[:, :, :, :, kt, ky, kx, :]
    dx = dxp[:, 1:-1, 1:-1, 1:-1, :]
    return dx, dw, db


def group_norm_forward(x: np.ndarray, groups: int, eps: float = EPS):
    """Normalize per (batch sample, channel group) over all other axes."""
    c = x.shape[-1]
    if c % groups:
        raise ValueError(f"{c} channels not divisible by {groups} groups")
    bs = x.shape[0]
    xg = x.reshape(bs, -1, groups, c // groups)  # (B, M, G, Cg)
    mu = xg.mean(axis=(1, 3), keepdims=True)
    var = xg.var(axis=(1, 3), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (xg - mu) * inv
    y = xhat.reshape(x.shape)
    return y, (xhat, inv, x.shape)


def group_norm_backward(dy: np.ndarray, cache):
    xhat, inv, xshape = cache
    dyg = dy.reshape(xhat.shape)
    dmean = dyg.mean(axis=(1, 3), keepdims=True)
    dproj = (dyg * xhat).mean(axis=(1, 3), keepdims=True)
    dx = inv * (dyg - dmean - xhat * dproj)
    return dx.reshape(xshape)


def silu_forward(x: np.ndarray):
    s = 1.0 / (1.0 + np.exp(-x))
    return x * s, (x, s)


def silu_backward(dy: np.ndarray, cache):
    x, s = cache
    return dy * s * (1.0 + x * (1.0 - s))


def modulate_forward(h: np.ndarray, gamma: np.ndarray, beta: np.ndarray, groups: int, eps: float = EPS):
    """Scale/bias injection around a skip: out = GN(h) * gamma + beta + h."""
    if gamma.shape != h.shape or beta.shape != h.shape:
        raise ValueError(
            f"modulation shapes {gamma.shape}/{beta.shape} do not match features {h.shape}"
        )
    g, gn_cache = group_norm_forward(h, groups, eps)
    out = g * gamma + beta + h
    return out, (g, gamma, gn_cache)


def modulate_backward(dy: np.ndarray, cache):
    g, gamma, gn_cache = cache
    dgamma = dy * g
    dbeta = dy
    dh = group_norm_backward(dy * gamma, gn_cache) + dy
    return dh, dgamma, dbeta


def channel_linear_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """Pointwise channel mix: y[..., j] = sum_i x[..., i] * w[j, i] + b[j]."""
    y = x @ w.T + b
    return y, (x, w)


def channel_linear_backward(dy: np.ndarray, cache):
    x, w = cache
    dx = dy @ w
    cin, cout = x.shape[-1], dy.shape[-1]
    dw = dy.reshape(-1, cout).T @ x.reshape(-1, cin)
    db = dy.reshape(-1, cout).sum(axis=0)
    return dx, dw, db


def avg_pool_forward(x: np.ndarray, factor: int):
    """Spatial mean over factor x factor blocks; time axis untouched."""
    bs, n, h, w, c = x.shape
    if h % factor or w % factor:
        raise ValueError(f"{h}x{w} not divisible by pool factor {factor}")
    xb = x.reshape(bs, n, h // factor, factor, w // factor, factor, c)
    return xb.mean(axis=(3, 5)), (x.shape, factor)


def avg_pool_backward(dy: np.ndarray, cache):
    xshape, factor = cache
    scale = 1.0 / (factor * factor)
    up = np.repeat(np.repeat(dy, factor, axis=2), factor, axis=3)
    return up * scale


def nn_upsample_forward(x: np.ndarray, factor: int):
    return np.repeat(np.repeat(x, factor, axis=2), factor, axis=3), (x.shape, factor)


def nn_upsample_backward(dy: np.ndarray, cache):
    xshape, factor = cache
    bs, n, h, w, c = xshape
    return dy.reshape(bs, n, h, factor, w, factor, c).sum(axis=(3, 5))


# Single-sample wrappers: the documented feature layout is (L, h, w, c).


def group_norm(h: np.ndarray, groups: int, eps: float = EPS) -> np.ndarray:
    """Group normalization of one feature tensor (L, h, w, c)."""
    y, _ = group_norm_forward(np.asarray(h, dtype=np.float64)[None], groups, eps)
    return y[0]


def modulate(h: np.ndarray, gamma: np.ndarray, beta: np.ndarray, groups: int = 1, eps: float = EPS) -> np.ndarray:
    """out = GN(h) * gamma + beta + h; gamma = beta = 0 is exactly identity."""
    h = np.asarray(h, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    # gamma = beta = 0 falls out exact: 0 * GN(h) + 0 + h == h bitwise.
    y, _ = modulate_forward(h[None], gamma[None], beta[None], groups, eps)
    return y[0]
