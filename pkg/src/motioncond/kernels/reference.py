"""Pure-NumPy reference implementations of the dense-field kernels.

These are the fallback backend when the compiled extension is unavailable
(and the ground truth the extension is benchmarked against). Every function
here has an identically-named, identically-shaped counterpart in
``motioncond.kernels._core``.

Coordinate convention: x rightward, y downward, origin at the center of the
top-left pixel. Out-of-bounds sampling clamps to the border.
"""

from __future__ import annotations

import numpy as np

BACKEND = "reference"


def bilinear_map(field: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample an (H, W, C) field at continuous positions, clamping at borders.

    Returns an (N, C) array of interpolated values.
    """
    field = np.asarray(field, dtype=np.float64)
    h, w = field.shape[:2]
    xs = np.clip(np.asarray(xs, dtype=np.float64), 0.0, w - 1.0)
    ys = np.clip(np.asarray(ys, dtype=np.float64), 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[:, None]
    fy = (ys - y0)[:, None]
    top = field[y0, x0] * (1.0 - fx) + field[y0, x1] * fx
    bot = field[y1, x0] * (1.0 - fx) + field[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def backward_warp(image: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Backward-warp an (H, W, C) image by an (H, W, 2) forward flow.

    out[y, x] = bilinear(image, x - flow[y, x, 0], y - flow[y, x, 1]).
    """
    image = np.asarray(image, dtype=np.float64)
    flow = np.asarray(flow, dtype=np.float64)
    h, w = image.shape[:2]
    gy, gx = np.mgrid[0:h, 0:w]
    xs = (gx - flow[:, :, 0]).ravel()
    ys = (gy - flow[:, :, 1]).ravel()
    return bilinear_map(image, xs, ys).reshape(image.shape)


def idw_densify(
    site_x: np.ndarray,
    site_y: np.ndarray,
    site_vals: np.ndarray,
    mask: np.ndarray,
    power: float,
) -> np.ndarray:
    """Inverse-distance-weighted interpolation of sparse 2-vectors.

    Sites are pixel positions (integer-valued floats). Output is an
    (H, W, 2) field: exact site values at site pixels, IDW elsewhere inside
    the mask, zero outside the mask.
    """
    site_x = np.asarray(site_x, dtype=np.float64)
    site_y = np.asarray(site_y, dtype=np.float64)
    site_vals = np.asarray(site_vals, dtype=np.float64)
    mask = np.asarray(mask)
    h, w = mask.shape
    out = np.zeros((h, w, 2), dtype=np.float64)
    if site_x.size == 0:
        return out
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        return out
    dx = xs[:, None] - site_x[None, :]
    dy = ys[:, None] - site_y[None, :]
    d2 = dx * dx + dy * dy
    exact = d2 <= 0.0
    weights = np.zeros_like(d2)
    nonzero = ~exact
    weights[nonzero] = d2[nonzero] ** (-power / 2.0)
    num = weights @ site_vals
    den = weights.sum(axis=1)
    hit_rows, hit_cols = np.nonzero(exact)
    with np.errstate(invalid="ignore", divide="ignore"):
        vals = num / den[:, None]  # 0/0 only at exact hits, overwritten next
    vals[hit_rows] = site_vals[hit_cols]
    out[ys, xs] = vals
    return out


def block_match(
    template: np.ndarray,
    frame: np.ndarray,
    cx: int,
    cy: int,
    radius: int,
) -> tuple[int, int, float]:
    """Find the integer position in `frame` whose patch best matches `template`.

    Searches centers (cx+dx, cy+dy) with |dx|, |dy| <= radius; patches are
    extracted with border clamping; cost is the summed squared difference.
    Ties break toward the smallest displacement from the search center
    (then smallest dy, then dx), so featureless regions stay put.
    """
    frame = np.asarray(frame, dtype=np.float64)
    template = np.asarray(template, dtype=np.float64)
    p = template.shape[0]
    half = p // 2
    h, w = frame.shape[:2]
    best = None
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            x, y = cx + dx, cy + dy
            rows = np.clip(np.arange(y - half, y - half + p), 0, h - 1)
            cols = np.clip(np.arange(x - half, x - half + p), 0, w - 1)
            patch = frame[np.ix_(rows, cols)]
            diff = patch - template
            cost = float(np.sum(diff * diff))
            key = (cost, dx * dx + dy * dy, dy, dx)
            if best is None or key < best[0]:
                best = (key, x, y)
    key, x, y = best
    return x, y, key[0]
