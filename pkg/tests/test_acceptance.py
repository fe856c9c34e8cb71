"""Release acceptance gate.

One test per criterion, run in order; each prints a single [Cnn] PASS/FAIL
line with the measured quantity next to its bound. Tolerances are frozen
here, not imported, so a regression in the library cannot silently relax
the gate. C6 trains 40 small models and takes a few minutes; everything
else finishes in seconds.
"""

import base64
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from motioncond import condition, propagate, synth
from motioncond.camproj import DepthMap, Intrinsics, lift, project
from motioncond.cli import main as cli_main
from motioncond.condition import (
    ConditionTensors,
    SamplerConfig,
    Track,
    TrackSet,
    load_condition,
    load_tracks,
    make_training_condition,
    sample_region_mask,
    save_condition,
    save_tracks,
    tracks_from_strokes,
)
from motioncond.grid import (
    BitMaskSeq,
    FlowField,
    VideoClip,
    read_flow_field,
    read_pgm,
    write_flow_field,
    write_pgm,
)
from motioncond.metrics import (
    FlowTracker,
    TrackerCorrespond,
    avg_flow_magnitude,
    frame_consistency,
    md_img,
    md_vid,
)
from motioncond.propagate import densify, warp_clip
from motioncond.synth import (
    Background,
    Blob,
    SceneSpec,
    VelocityMotion,
    encode_frame_png,
    ground_truth,
    oracle_track,
    render_clip,
)
from motioncond.toynet import (
    EDMSchedule,
    ToyConfig,
    ToyDenoiser,
    TrainConfig,
    denoiser_forward,
    edm_precondition,
    grad_check,
    load_checkpoint,
    save_checkpoint,
    train_toy,
    validation_loss,
)
from motioncond.toynet.denoiser import denoiser_apply, denoiser_grads
from motioncond.toynet.layers import (
    channel_linear_backward,
    channel_linear_forward,
    modulate_backward,
    modulate_forward,
)

from oracles import avg_flow_oracle, condition_oracle


def _report(cid: str, ok: bool, detail: str) -> None:
    print(f"[{cid}] {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"{cid}: {detail}"


# ---------------------------------------------------------------------------
# C1: conditioning pipeline equals the scalar-loop oracle bit for bit


def test_c01_condition_pipeline_matches_oracle():
    rng = np.random.default_rng(2026)
    start = time.monotonic()
    mismatches = 0
    n = 120
    for i in range(n):
        k = int(rng.choice([1, 2, 4, 8]))
        length = int(rng.integers(2, 9))
        hk = int(rng.integers(1, 32 // k + 1))
        wk = int(rng.integers(1, 32 // k + 1))
        h, w = hk * k, wk * k
        flow = np.zeros((length, h, w, 2))
        flow[1:] = rng.normal(scale=2.0, size=(length - 1, h, w, 2))
        vis = (rng.random((length, h, w)) > 0.2).astype(np.uint8)
        r_min = float(rng.uniform(0.5, 1.0))
        threshold = float(rng.uniform(0.5, 2.0))
        cfg = SamplerConfig(k=k, r_min=r_min, threshold=threshold, seed=i)
        got = make_training_condition(FlowField(flow), BitMaskSeq(vis), cfg)
        traj, mask_seq, _ = condition_oracle(flow, vis, k, r_min, threshold, i)
        if not (np.array_equal(got.traj, traj) and np.array_equal(got.mask_seq, mask_seq)):
            mismatches += 1
    elapsed = time.monotonic() - start
    _report(
        "C1",
        mismatches == 0 and elapsed < 10.0,
        f"{n} instances, {mismatches} mismatches, {elapsed:.2f}s (< 10s)",
    )


# ---------------------------------------------------------------------------
# C2: region selection density statistics


def test_c02_selection_density_mean():
    fracs = [
        sample_region_mask(100, 100, SamplerConfig(r_min=0.95, seed=s)).bits.mean()
        for s in range(1000)
    ]
    mean = float(np.mean(fracs))
    _report("C2", abs(mean - 0.025) <= 0.005, f"mean fraction {mean:.6f} (0.025 +/- 0.005)")


# ---------------------------------------------------------------------------
# C3: fresh model output is exactly invariant to the conditioning input


def test_c03_zero_init_conditioning_invariance():
    rng = np.random.default_rng(31)
    model = ToyDenoiser.init(ToyConfig(), seed=0)
    z = rng.standard_normal((2, 4, 4, 3))
    ci = rng.standard_normal((4, 4, 3))
    ya = denoiser_forward(model, z, 0.5, ci, rng.standard_normal((2, 16, 16, 3)))
    yb = denoiser_forward(model, z, 0.5, ci, np.zeros((2, 16, 16, 3)))
    yc = denoiser_forward(model, z, 0.5, ci, rng.standard_normal((2, 16, 16, 3)) * 10.0)
    diff = max(float(np.max(np.abs(ya - yb))), float(np.max(np.abs(ya - yc))))
    _report("C3", diff == 0.0, f"max abs output diff {diff!r} (exactly 0.0)")


# ---------------------------------------------------------------------------
# C4: finite-difference gradient checks


def test_c04_gradient_checks():
    rng = np.random.default_rng(12345)
    start = time.monotonic()

    h = rng.standard_normal((1, 2, 3, 4))
    coef = rng.standard_normal(h.shape)
    params = {
        "h": h.copy(),
        "gamma": rng.standard_normal(h.shape) * 0.5,
        "beta": rng.standard_normal(h.shape) * 0.5,
    }

    def f_mod(p):
        y, cache = modulate_forward(p["h"], p["gamma"], p["beta"], groups=2)
        dh, dgamma, dbeta = modulate_backward(coef, cache)
        return float(np.sum(coef * y)), {"h": dh, "gamma": dgamma, "beta": dbeta}

    err_mod = grad_check(f_mod, params, eps=1e-5)

    x = rng.standard_normal((6, 3))
    coef2 = rng.standard_normal((6, 3))
    params2 = {
        "w": rng.standard_normal((3, 3)),
        "a": rng.standard_normal((3, 2)),
        "b": rng.standard_normal((3, 2)),
        "bias": rng.standard_normal(3),
    }

    def f_lora(p):
        y, cache = channel_linear_forward(x, p["w"] + p["a"] @ p["b"].T, p["bias"])
        _, dwf, dbias = channel_linear_backward(coef2, cache)
        grads = {"w": dwf, "a": dwf @ p["b"], "b": dwf.T @ p["a"], "bias": dbias}
        return float(np.sum(coef2 * y)), grads

    err_lora = grad_check(f_lora, params2, eps=1e-5)

    tiny = ToyConfig(c1=4, c2=4, enc_width=2, groups=2, lora_rank=2)
    model = ToyDenoiser.init(tiny, seed=0)
    for key in ("mix1.lora_b", "mix2.lora_b", "head1.w", "head1.b", "head2.w", "head2.b"):
        model.params[key] = rng.standard_normal(model.params[key].shape) * 0.05
    z0 = rng.standard_normal((1, 2, 2, 2, 3)) * 0.3
    z = z0 + 0.4 * rng.standard_normal(z0.shape)
    ci = rng.standard_normal((1, 2, 2, 3)) * 0.3
    cx = rng.standard_normal((1, 2, 8, 8, 3)) * 0.5
    sigma = np.array([0.4])

    def f_full(params):
        m = ToyDenoiser(tiny, params)
        zhat, cache = denoiser_apply(m, z, sigma, ci, cx)
        diff = zhat - z0
        dzhat = (2.0 / diff.size) * diff
        return float(np.mean(diff**2)), denoiser_grads(m, dzhat, cache)

    err_full = grad_check(f_full, model.params, eps=1e-5)
    elapsed = time.monotonic() - start
    worst = max(err_mod, err_lora, err_full)
    _report(
        "C4",
        worst < 1e-4 and elapsed < 60.0,
        f"rel errors mod {err_mod:.2e} lora {err_lora:.2e} full {err_full:.2e} "
        f"(< 1e-4), {elapsed:.1f}s (< 60s)",
    )


# ---------------------------------------------------------------------------
# C5: preconditioning coefficient golden values


def test_c05_edm_coefficient_goldens():
    c_skip, c_out, c_in, _ = edm_precondition(0.5, EDMSchedule(sigma_data=0.5))
    worst = max(abs(c_skip - 0.5), abs(c_out - 0.353553), abs(c_in - 1.414214))
    _report(
        "C5",
        worst <= 1e-6,
        f"(c_skip, c_out, c_in) = ({c_skip:.6f}, {c_out:.6f}, {c_in:.6f}), "
        f"max dev {worst:.2e} (<= 1e-6)",
    )


# ---------------------------------------------------------------------------
# C6: paired-training conditioning benefit on a 200-clip synthetic set
#
# Blob color encodes the motion direction, so the trajectory planes carry
# information the noisy latents lack; validation draws sigma from a high-noise
# schedule where that information dominates. 20 seed-matched pairs, win =
# conditioned held-out loss strictly below the cond-zeroed twin's.

PALETTE = {
    (1, 0): (0.95, 0.1, 0.1), (-1, 0): (0.1, 0.95, 0.1),
    (0, 1): (0.1, 0.1, 0.95), (0, -1): (0.95, 0.95, 0.1),
    (1, 1): (0.95, 0.1, 0.95), (-1, -1): (0.1, 0.95, 0.95),
    (1, -1): (0.95, 0.55, 0.1), (-1, 1): (0.55, 0.1, 0.95),
}


def _benefit_dataset(n, seed):
    rng = np.random.default_rng(seed)
    out = []
    dirs = list(PALETTE)
    for i in range(n):
        v = dirs[int(rng.integers(0, 8))]
        cx = float(rng.uniform(6.5, 9.5))
        cy = float(rng.uniform(6.5, 9.5))
        spec = SceneSpec(
            length=4, height=16, width=16,
            background=Background(color=(0.15, 0.15, 0.2), velocity=(0.0, 0.0)),
            blobs=(Blob(center=(cx, cy), radius=float(rng.uniform(3.5, 4.5)),
                        color=PALETTE[v],
                        motion=VelocityMotion((float(v[0]), float(v[1])))),),
            seed=int(rng.integers(0, 2**31)),
        )
        clip = synth.render_clip(spec)
        gt = synth.ground_truth(spec)
        cond = make_training_condition(
            gt.flow, gt.visibility,
            SamplerConfig(k=4, r_min=0.95, ratio_mode="keep", seed=i))
        out.append((clip, cond))
    return out


def _zero_cond(dataset):
    return [
        (clip, ConditionTensors(traj=np.zeros_like(c.traj), mask_seq=np.zeros_like(c.mask_seq)))
        for clip, c in dataset
    ]


def test_c06_conditioning_benefit():
    start = time.monotonic()
    data = _benefit_dataset(200, 99)
    train, val = data[:160], data[160:]
    train_z = _zero_cond(train)
    model_cfg = ToyConfig(c1=4, c2=4, enc_width=4, groups=2, lora_rank=2)
    sched = EDMSchedule(sigma_data=0.5, p_mean=0.5, p_std=1.0)
    wins = 0
    gaps = []
    for i in range(20):
        cfg = TrainConfig(lr=2e-3, steps=1000, batch_size=8, seed=i, schedule=sched)
        m_c, _ = train_toy(train, cfg, model_config=model_cfg)
        m_z, _ = train_toy(train_z, cfg, model_config=model_cfg)
        vc = validation_loss(val, m_c, cfg, seed=1000 + i, zero_condition=False, draws=8)
        vz = validation_loss(val, m_z, cfg, seed=1000 + i, zero_condition=True, draws=8)
        wins += vc < vz
        gaps.append((vz - vc) / vz)
    elapsed = time.monotonic() - start
    _report(
        "C6",
        wins >= 18 and elapsed < 1800.0,
        f"{wins}/20 wins (>= 18), gap min {min(gaps):+.4f} median {sorted(gaps)[10]:+.4f}, "
        f"{elapsed:.0f}s (< 1800s)",
    )


# ---------------------------------------------------------------------------
# C7: metric pipeline against the analytic tracker


class _FixedTracker:
    def __init__(self, positions):
        self.positions = np.asarray(positions, dtype=np.float64)

    def track(self, clip, points):
        return TrackSet(tuple(Track(p) for p in self.positions))


class _FixedCorrespond:
    def __init__(self, positions):
        self.positions = np.asarray(positions, dtype=np.float64)

    def correspond(self, clip, points):
        return self.positions.copy(), np.ones(self.positions.shape[0], dtype=bool)


def test_c07_metric_oracle_pipeline():
    spec = SceneSpec(
        length=6, height=32, width=32,
        background=Background(color=(0.1, 0.1, 0.15), velocity=(0.0, 0.0)),
        blobs=(Blob(center=(10.0, 16.0), radius=5.0, color=(0.9, 0.2, 0.2),
                    motion=VelocityMotion((2.0, 0.0))),),
        seed=5,
    )
    clip = render_clip(spec)
    gt = ground_truth(spec)
    cond = make_training_condition(
        gt.flow, gt.visibility, SamplerConfig(k=4, r_min=0.95, ratio_mode="keep", seed=0))
    dense = densify(cond)
    preview = warp_clip(clip.frames[0], dense)
    pts = [(10.0, 16.0), (8.0, 14.0), (12.0, 18.0), (10.0, 13.0), (13.0, 16.0)]
    res = md_vid(oracle_track(spec, pts), preview, FlowTracker(dense))

    ref = oracle_track(spec, pts)
    same_vid = md_vid(ref, preview, _FixedTracker(ref.positions_array()))
    same_img = md_img(ref, preview, _FixedCorrespond(ref.positions_array()))

    static = SceneSpec(
        length=5, height=24, width=24,
        background=Background(color=(0.3, 0.4, 0.5), velocity=(0.0, 0.0)),
        blobs=(Blob(center=(12.0, 12.0), radius=4.0, color=(0.8, 0.7, 0.1),
                    motion=VelocityMotion((0.0, 0.0))),),
        seed=9,
    )
    fc = frame_consistency(render_clip(static))
    _report(
        "C7",
        res.value <= 1.0
        and same_vid.value == 0.0
        and same_img.value == 0.0
        and abs(fc - 1.0) <= 1e-9,
        f"pipeline md_vid {res.value:.4f} (<= 1.0 px), identical-track md "
        f"({same_img.value}, {same_vid.value}) (== 0), static fc dev {abs(fc - 1.0):.1e} (<= 1e-9)",
    )


# ---------------------------------------------------------------------------
# C8: average flow magnitude


def test_c08_average_flow_magnitude():
    ramp = np.zeros((5, 6, 6, 2))
    for i in range(5):
        ramp[i, :, :, 0] = 3.0 * i  # frame-1-relative ramp: every step is (3, 0)
    uniform = avg_flow_magnitude(FlowField(ramp))

    spec = SceneSpec(
        length=6, height=32, width=32,
        background=Background(color=(0.1, 0.1, 0.15), velocity=(0.0, 0.0)),
        blobs=(Blob(center=(10.0, 16.0), radius=5.0, color=(0.9, 0.2, 0.2),
                    motion=VelocityMotion((2.0, 0.0))),),
        seed=5,
    )
    gt = ground_truth(spec)
    got = avg_flow_magnitude(gt.flow)
    want = avg_flow_oracle(gt.flow.flow)
    _report(
        "C8",
        uniform == 3.0 and abs(got - want) <= 1e-9,
        f"uniform (3,0) -> {uniform!r} (== 3.0), synth vs oracle dev {abs(got - want):.1e} (<= 1e-9)",
    )


# ---------------------------------------------------------------------------
# C9: camera geometry


def test_c09_camera_geometry():
    intr = Intrinsics(fx=100.0, fy=100.0, cx=32.0, cy=24.0)
    rng = np.random.default_rng(7)
    depth = DepthMap(rng.uniform(1.0, 9.0, size=(48, 64)))
    u = rng.integers(0, 64, size=25).astype(np.float64)
    v = rng.integers(0, 48, size=25).astype(np.float64)
    pixels = np.stack([u, v], axis=1)
    world = lift(pixels, depth, intr)
    back = project(world, np.eye(3), np.zeros(3), intr)
    round_trip = float(np.max(np.abs(back - pixels)))

    base = project([(0.0, 0.0, 10.0)], np.eye(3), np.zeros(3), intr)
    moved = project([(0.0, 0.0, 10.0)], np.eye(3), np.array([0.1, 0.0, 0.0]), intr)
    golden_dev = abs((moved[0, 0] - base[0, 0]) + 1.0)
    _report(
        "C9",
        round_trip <= 1e-9 and golden_dev <= 1e-9,
        f"round trip {round_trip:.1e} (<= 1e-9), fx=100 Z=10 tx=0.1 displacement dev "
        f"{golden_dev:.1e} from -1.0 px (<= 1e-9)",
    )


# ---------------------------------------------------------------------------
# C10: storage formats round-trip bit-identically; CLI reruns are byte-stable


SCENE = {
    "version": 1,
    "canvas": {"frames": 6, "height": 32, "width": 32},
    "frame_rate": 8.0,
    "seed": 0,
    "background": {"color": [0.1, 0.1, 0.1], "velocity": [0.0, 0.0]},
    "blobs": [
        {
            "center": [10.0, 16.0],
            "radius": 4.0,
            "color": [0.9, 0.2, 0.1],
            "motion": {"kind": "velocity", "velocity": [2.0, 0.0]},
        }
    ],
}


def _dir_bytes(d):
    d = Path(d)
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_c10_format_round_trips_and_cli_determinism(tmp_path, capsys):
    rng = np.random.default_rng(10)

    # flow directory: float32 storage, so float32-representable input is the contract
    flow = np.zeros((4, 8, 8, 2))
    flow[1:] = rng.normal(scale=3.0, size=(3, 8, 8, 2)).astype(np.float32)
    field = FlowField(flow)
    write_flow_field(tmp_path / "flow", field, prefix="flow")
    flow_ok = np.array_equal(read_flow_field(tmp_path / "flow").flow, flow)

    # trajectory JSON: exact for arbitrary float64 positions
    tracks = TrackSet(tuple(Track(rng.standard_normal((5, 2)) * 7.0) for _ in range(4)))
    save_tracks(tmp_path / "tracks.json", tracks)
    loaded = load_tracks(tmp_path / "tracks.json")
    tracks_ok = all(
        np.array_equal(a.positions, b.positions) for a, b in zip(tracks, loaded)
    )

    # mask PGM
    mask = (rng.random((16, 16)) > 0.5).astype(np.uint8)
    write_pgm(tmp_path / "m.pgm", mask)
    mask_ok = np.array_equal(read_pgm(tmp_path / "m.pgm"), mask)

    # condition directory (.flo planes + mask.pgm)
    vis = np.ones((4, 8, 8), dtype=np.uint8)
    cond = make_training_condition(
        field, BitMaskSeq(vis), SamplerConfig(k=2, r_min=0.5, seed=1))
    save_condition(tmp_path / "cond", cond)
    back = load_condition(tmp_path / "cond")
    cond_ok = np.array_equal(back.traj, cond.traj) and np.array_equal(
        back.mask_seq, cond.mask_seq)

    # checkpoint: float64 payload plus metadata
    tensors = {"w": rng.standard_normal((3, 4)), "b": rng.standard_normal(4)}
    save_checkpoint(tmp_path / "ck.npz", tensors, meta={"steps": 12})
    t2, meta = load_checkpoint(tmp_path / "ck.npz")
    ck_ok = (
        all(np.array_equal(t2[k], tensors[k]) for k in tensors) and meta["steps"] == 12
    )

    # CLI determinism: identical invocations produce identical bytes
    scene = tmp_path / "scene.json"
    scene.write_text(json.dumps(SCENE))
    for out in ("sa", "sb"):
        assert cli_main(["synth", "--scene", str(scene), "--out", str(tmp_path / out)]) == 0
    synth_ok = _dir_bytes(tmp_path / "sa") == _dir_bytes(tmp_path / "sb")
    for out in ("ca", "cb"):
        assert cli_main([
            "condition", "--mode", "train",
            "--flow", str(tmp_path / "sa" / "flow"), "--vis", str(tmp_path / "sa" / "vis"),
            "--seed", "7", "--out", str(tmp_path / out),
        ]) == 0
    cond_cli_ok = _dir_bytes(tmp_path / "ca") == _dir_bytes(tmp_path / "cb")
    capsys.readouterr()
    _report(
        "C10",
        flow_ok and tracks_ok and mask_ok and cond_ok and ck_ok and synth_ok and cond_cli_ok,
        f"flow {flow_ok}, tracks {tracks_ok}, mask {mask_ok}, condition {cond_ok}, "
        f"checkpoint {ck_ok}, cli synth {synth_ok}, cli condition {cond_cli_ok}",
    )


# ---------------------------------------------------------------------------
# C11: the HTTP service and the file pipeline agree byte for byte


STROKE = {"version": 1, "strokes": [{"points": [[8.0, 8.0], [14.3, 9.7]]}]}
RUNS = [[r * 32 + 4, 16] for r in range(4, 12)]


def test_c11_cli_service_parity(tmp_path, capsys):
    from fastapi.testclient import TestClient

    from motioncond.serve import build_app

    rng = np.random.default_rng(77)
    img = rng.integers(0, 256, size=(32, 32, 3)).astype(np.float64) / 255.0

    with TestClient(build_app()) as client:
        sid = client.post("/session").json()["id"]
        client.post(f"/session/{sid}/image", content=encode_frame_png(img))
        client.put(
            f"/session/{sid}/mask",
            json={"version": 1, "height": 32, "width": 32, "runs": RUNS},
        )
        client.put(f"/session/{sid}/strokes", content=json.dumps(STROKE))
        client.put(f"/session/{sid}/config", json={"length": 6, "k": 8})
        doc = client.get(f"/session/{sid}/condition").json()
        srv_files = {name: base64.b64decode(b64) for name, b64 in doc["files"].items()}
        preview = client.get(f"/session/{sid}/preview").json()
        srv_frames = [base64.b64decode(f) for f in preview["frames"]]
        srv_metrics = client.get(f"/session/{sid}/metrics").json()

    brush = np.zeros((32, 32), dtype=np.uint8)
    brush[4:12, 4:20] = 1
    write_pgm(tmp_path / "brush.pgm", brush)
    (tmp_path / "strokes.json").write_text(json.dumps(STROKE))
    (tmp_path / "ref.png").write_bytes(encode_frame_png(img))
    assert cli_main([
        "condition", "--mode", "infer", "--strokes", str(tmp_path / "strokes.json"),
        "--brush", str(tmp_path / "brush.pgm"), "--length", "6", "--k", "8",
        "--out", str(tmp_path / "cond"),
    ]) == 0
    assert cli_main([
        "preview", "--frame", str(tmp_path / "ref.png"), "--cond", str(tmp_path / "cond"),
        "--out", str(tmp_path / "prev"), "--flow-out", str(tmp_path / "flow"),
    ]) == 0
    strokes = [np.asarray(s["points"], dtype=np.float64) for s in STROKE["strokes"]]
    save_tracks(tmp_path / "tracks.json", tracks_from_strokes(strokes, 6))
    assert cli_main([
        "eval", "--frames", str(tmp_path / "prev"), "--tracks", str(tmp_path / "tracks.json"),
        "--tracker", "oracle", "--flow", str(tmp_path / "flow"),
        "--report", str(tmp_path / "report.json"),
    ]) == 0
    capsys.readouterr()
    cli_files = {p.name: p.read_bytes() for p in sorted((tmp_path / "cond").iterdir())}
    cli_frames = [p.read_bytes() for p in sorted((tmp_path / "prev").glob("frame_*.png"))]
    cli_metrics = json.loads((tmp_path / "report.json").read_text())

    files_ok = sorted(srv_files) == sorted(cli_files) and all(
        srv_files[n] == cli_files[n] for n in srv_files
    )
    frames_ok = len(srv_frames) == len(cli_frames) and all(
        a == b for a, b in zip(srv_frames, cli_frames)
    )
    keys = ("md_img", "md_vid", "frame_consistency", "avg_flow_magnitude", "excluded_points")
    eval_ok = all(srv_metrics[k] == cli_metrics[k] for k in keys)
    _report(
        "C11",
        files_ok and frames_ok and eval_ok,
        f"condition files identical {files_ok}, preview frames identical {frames_ok}, "
        f"eval values bit-equal {eval_ok}",
    )
