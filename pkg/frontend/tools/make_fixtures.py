"""Regenerate the golden fixtures under tests/fixtures/.

The brush rasterization cases are computed here with independent scalar
loops implementing the documented rules (floor(x + 0.5) rounding, disc =
integer pixels within radius of the integer center, drag = disc stamped
at each rounded point along the segment), so the TypeScript implementation
is checked against a second implementer rather than against itself. The
PGM and CRC goldens come from the Python package and zlib directly, which
is exactly the parity the exports must hit.

Run from this directory: python3 make_fixtures.py
"""

import base64
import json
import math
import zlib
from pathlib import Path

from motioncond.grid import encode_pgm
import numpy as np

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def snap(x):
    return math.floor(x + 0.5)


def stamp_disc(bits, h, w, cx, cy, radius, value):
    icx, icy = snap(cx), snap(cy)
    r = max(0.0, radius)
    for y in range(max(0, math.ceil(icy - r)), min(h - 1, math.floor(icy + r)) + 1):
        for x in range(max(0, math.ceil(icx - r)), min(w - 1, math.floor(icx + r)) + 1):
            if (x - icx) ** 2 + (y - icy) ** 2 <= r * r:
                bits[y * w + x] = value


def stamp_segment(bits, h, w, ax, ay, bx, by, radius, value):
    x0, y0, x1, y1 = snap(ax), snap(ay), snap(bx), snap(by)
    steps = max(abs(x1 - x0), abs(y1 - y0))
    if steps == 0:
        stamp_disc(bits, h, w, x0, y0, radius, value)
        return
    for t in range(steps + 1):
        stamp_disc(
            bits, h, w,
            snap(x0 + (x1 - x0) * t / steps),
            snap(y0 + (y1 - y0) * t / steps),
            radius, value,
        )


def to_runs(bits):
    runs = []
    start = -1
    for i, b in enumerate(bits):
        if b and start < 0:
            start = i
        elif not b and start >= 0:
            runs.append([start, i - start])
            start = -1
    if start >= 0:
        runs.append([start, len(bits) - start])
    return runs


def apply_ops(h, w, ops):
    bits = [0] * (h * w)
    for op in ops:
        if op["type"] == "disc":
            stamp_disc(bits, h, w, op["cx"], op["cy"], op["radius"], op["value"])
        else:
            stamp_segment(bits, h, w, op["ax"], op["ay"], op["bx"], op["by"], op["radius"], op["value"])
    return bits


def mask_stamp_cases():
    cases = []
    specs = [
        ("single disc r=0", 8, 8, [{"type": "disc", "cx": 3, "cy": 4, "radius": 0, "value": 1}]),
        ("disc r=2 centered", 9, 9, [{"type": "disc", "cx": 4, "cy": 4, "radius": 2, "value": 1}]),
        ("disc clipped at corner", 6, 6, [{"type": "disc", "cx": 0, "cy": 0, "radius": 2.5, "value": 1}]),
        ("fractional center snaps", 8, 8, [{"type": "disc", "cx": 3.5, "cy": 2.4, "radius": 1.5, "value": 1}]),
        ("horizontal drag", 8, 16, [{"type": "segment", "ax": 2, "ay": 3, "bx": 12, "by": 3, "radius": 1, "value": 1}]),
        ("diagonal drag", 12, 12, [{"type": "segment", "ax": 1, "ay": 1, "bx": 10, "by": 7, "radius": 1.2, "value": 1}]),
        ("zero-length drag", 8, 8, [{"type": "segment", "ax": 4.2, "ay": 4.6, "bx": 4.4, "by": 4.5, "radius": 2, "value": 1}]),
        (
            "paint then erase center",
            10, 10,
            [
                {"type": "disc", "cx": 5, "cy": 5, "radius": 3, "value": 1},
                {"type": "disc", "cx": 5, "cy": 5, "radius": 1, "value": 0},
            ],
        ),
        (
            "two drags cross",
            16, 16,
            [
                {"type": "segment", "ax": 2, "ay": 8, "bx": 13, "by": 8, "radius": 1.5, "value": 1},
                {"type": "segment", "ax": 8, "ay": 2, "bx": 8, "by": 13, "radius": 1.5, "value": 1},
                {"type": "segment", "ax": 4, "ay": 8, "bx": 11, "by": 8, "radius": 0.5, "value": 0},
            ],
        ),
    ]
    for name, h, w, ops in specs:
        bits = apply_ops(h, w, ops)
        cases.append({
            "name": name, "height": h, "width": w, "ops": ops,
            "runs": to_runs(bits), "count": sum(bits),
        })
    return cases


def rle_codec_cases():
    valid = [
        {"name": "empty", "height": 3, "width": 4, "runs": [], "pixels": []},
        {"name": "full", "height": 2, "width": 3, "runs": [[0, 6]], "pixels": [[x, y] for y in range(2) for x in range(3)]},
        {
            "name": "row straddle",
            "height": 3, "width": 4,
            "runs": [[2, 4]],
            "pixels": [[2, 0], [3, 0], [0, 1], [1, 1]],
        },
        {
            "name": "overlapping runs merge",
            "height": 2, "width": 8,
            "runs": [[1, 3], [2, 4]],
            "pixels": [[1, 0], [2, 0], [3, 0], [4, 0], [5, 0]],
        },
    ]
    invalid = [
        {"name": "bad version", "doc": {"version": 2, "height": 2, "width": 2, "runs": []}, "error": "mask.version"},
        {"name": "zero length", "doc": {"version": 1, "height": 2, "width": 2, "runs": [[0, 0]]}, "error": "mask.runs[0]"},
        {"name": "run leaves grid", "doc": {"version": 1, "height": 2, "width": 2, "runs": [[3, 2]]}, "error": "leaves the 4-pixel grid"},
        {"name": "negative start", "doc": {"version": 1, "height": 2, "width": 2, "runs": [[-1, 2]]}, "error": "mask.runs[0]"},
        {"name": "second run bad", "doc": {"version": 1, "height": 2, "width": 4, "runs": [[0, 2], [7, 3]]}, "error": "mask.runs[1]"},
    ]
    return {"valid": valid, "invalid": invalid}


def pgm_cases():
    cases = []
    for name, h, w, runs in [
        ("empty 3x4", 3, 4, []),
        ("one pixel", 3, 4, [[6, 1]]),
        ("banded 5x5", 5, 5, [[0, 5], [10, 5], [20, 5]]),
        ("stamped disc", 9, 9, None),
    ]:
        if runs is None:
            bits = apply_ops(9, 9, [{"type": "disc", "cx": 4, "cy": 4, "radius": 2, "value": 1}])
            runs = to_runs(bits)
        grid = np.zeros(h * w, dtype=np.uint8)
        for start, length in runs:
            grid[start:start + length] = 1
        pgm = encode_pgm(grid.reshape(h, w))
        cases.append({
            "name": name, "height": h, "width": w, "runs": runs,
            "pgm_b64": base64.b64encode(pgm).decode("ascii"),
        })
    return cases


def crc_cases():
    payloads = [b"", b"a", b"123456789", b"hello zip", bytes(range(256)), b"\x00" * 1000]
    return [
        {"data_b64": base64.b64encode(p).decode("ascii"), "crc": zlib.crc32(p) & 0xFFFFFFFF}
        for p in payloads
    ]


def snap_cases():
    xs = [0.0, 0.4, 0.5, 0.6, 1.5, 2.5, -0.4, -0.5, -0.6, -1.5, -2.5, 10.49, 10.5, 3.0]
    return [{"x": x, "snapped": snap(x)} for x in xs]


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    fixtures = {
        "mask_stamps.json": mask_stamp_cases(),
        "rle_codec.json": rle_codec_cases(),
        "pgm.json": pgm_cases(),
        "crc32.json": crc_cases(),
        "snap.json": snap_cases(),
    }
    for name, doc in fixtures.items():
        path = OUT / name
        path.write_text(json.dumps(doc, indent=2) + "\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
