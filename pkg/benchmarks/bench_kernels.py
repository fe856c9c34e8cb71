"""Timing comparison of the compiled kernel extension vs the NumPy reference.

Run from the repository root:

    python3 benchmarks/bench_kernels.py [--repeats 5]

Each kernel runs on a fixed synthetic workload with both backends; the
smallest wall time per backend is reported together with the speedup and a
max-abs-difference agreement check.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from motioncond.kernels import get_backend


def _best_of(fn, args, repeats):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def _workloads(rng):
    h, w = 192, 256
    field = rng.normal(size=(h, w, 2))
    xs = rng.uniform(0, w - 1, size=5000)
    ys = rng.uniform(0, h - 1, size=5000)

    image = rng.uniform(0, 1, size=(h, w, 3))
    flow = rng.normal(scale=3.0, size=(h, w, 2))

    mask = np.zeros((h, w), dtype=np.uint8)
    mask[20:170, 30:220] = 1
    site_y, site_x = np.nonzero(mask[::12, ::12])
    site_x = (site_x * 12).astype(np.float64)
    site_y = (site_y * 12).astype(np.float64)
    vals = rng.normal(size=(site_x.size, 2))

    template = rng.uniform(0, 1, size=(9, 9, 3))
    frame = rng.uniform(0, 1, size=(h, w, 3))

    return [
        ("bilinear_map", "192x256 field, 5k samples", (field, xs, ys)),
        ("backward_warp", "192x256 RGB, dense flow", (image, flow)),
        ("idw_densify", f"{site_x.size} sites -> 192x256", (site_x, site_y, vals, mask, 2.0)),
        ("block_match", "9x9 patch, radius 12", (template, frame, 128, 96, 12)),
    ]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=5, help="take the best of N timings")
    args = ap.parse_args()

    ref = get_backend("reference")
    try:
        fast = get_backend("compiled")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return 1

    rng = np.random.default_rng(0)
    rows = []
    for name, desc, work in _workloads(rng):
        t_ref, out_ref = _best_of(getattr(ref, name), work, args.repeats)
        t_fast, out_fast = _best_of(getattr(fast, name), work, args.repeats)
        diff = float(np.max(np.abs(np.asarray(out_ref, dtype=np.float64) - np.asarray(out_fast, dtype=np.float64))))
        rows.append((name, desc, t_ref, t_fast, t_ref / t_fast, diff))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  {'reference':>10}  {'compiled':>10}  {'speedup':>8}  {'max |diff|':>10}  workload")
    for name, desc, t_ref, t_fast, speedup, diff in rows:
        print(f"{name:<{width}}  {t_ref * 1e3:>8.2f}ms  {t_fast * 1e3:>8.2f}ms  {speedup:>7.1f}x  {diff:>10.2e}  {desc}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
