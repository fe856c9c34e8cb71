"""Command-line entry point.

Subcommands: synth, condition, preview, train-toy, eval, camera, serve.
Every subcommand prints a one-object JSON summary to stdout on success and
exits 0; failures print a single-line diagnostic to stderr and exit nonzero.

A TOML file passed via --config preloads flag defaults per subcommand
(section name = subcommand, keys = flag names with dashes as underscores);
explicit command-line flags always win. The MOTIONCOND_SEED environment
variable supplies the default for every --seed flag.

Defaults follow the reference setup: region size k=8, minimal mask ratio
0.95, 16 frames, motion threshold 1.0 px, LoRA rank 32.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import camproj, condition, metrics, propagate, synth
from .grid import (
    BitMask2D,
    read_flow_field,
    read_mask_seq,
    read_pgm,
    write_flow_field,
    write_mask_seq,
)

DEFAULT_K = 8
DEFAULT_R_MIN = 0.95
DEFAULT_LENGTH = 16
DEFAULT_THRESHOLD = 1.0


def _env_seed() -> int:
    raw = os.environ.get("MOTIONCOND_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"MOTIONCOND_SEED={raw!r} is not an integer") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # single-line diagnostics, no usage dump
        print(f"error: {message}", file=sys.stderr)
        sys.exit(2)


def _emit(summary: dict) -> int:
    print(json.dumps(summary))
    return 0


def _load_strokes(path) -> list:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("version") != 1:
        raise ValueError(f"{path}: unsupported strokes version {doc.get('version')!r}")
    strokes = doc.get("strokes")
    if not isinstance(strokes, list) or not strokes:
        raise ValueError(f"{path}: field 'strokes' must be a nonempty list")
    out = []
    for i, s in enumerate(strokes):
        pts = s.get("points")
        if not pts:
            raise ValueError(f"{path}: strokes[{i}].points is empty")
        out.append(np.asarray(pts, dtype=np.float64))
    return out


def _cmd_synth(args) -> int:
    spec = synth.load_scene(args.scene)
    out = Path(args.out)
    clip = synth.render_clip(spec)
    gt = synth.ground_truth(spec)
    frame_paths = synth.write_frames(out / "frames", clip)
    write_flow_field(out / "flow", gt.flow)
    write_mask_seq(out / "vis", gt.visibility)
    synth.save_scene(out / "scene.json", spec)
    return _emit(
        {
            "command": "synth",
            "out": str(out),
            "frames": len(frame_paths),
            "height": spec.height,
            "width": spec.width,
            "blobs": len(spec.blobs),
        }
    )


def _cmd_condition(args) -> int:
    out = Path(args.out)
    if args.mode == "train":
        if not args.flow or not args.vis:
            raise ValueError("--mode train needs --flow and --vis directories")
        flow = read_flow_field(args.flow)
        vis = read_mask_seq(args.vis)
        cfg = condition.SamplerConfig(
            k=args.k, r_min=args.r_min, threshold=args.threshold,
            seed=args.seed, ratio_mode=args.ratio_mode,
        )
        cond = condition.make_training_condition(flow, vis, cfg)
    else:
        if not args.strokes or not args.brush:
            raise ValueError("--mode infer needs --strokes JSON and --brush PGM")
        strokes = _load_strokes(args.strokes)
        brush = BitMask2D(read_pgm(args.brush))
        cond = condition.rasterize_user_trajectory(strokes, args.length, args.k, brush)
    condition.save_condition(out, cond)
    n, h, w, _ = cond.traj.shape
    return _emit(
        {
            "command": "condition",
            "mode": args.mode,
            "out": str(out),
            "length": n,
            "height": h,
            "width": w,
            "nonzero_px": int(np.any(cond.traj != 0, axis=(0, 3)).sum()),
            "mask_px": int(cond.mask_seq[0, :, :, 0].sum()),
        }
    )


def _cmd_preview(args) -> int:
    ref = synth.read_frame(args.frame)
    cond = condition.load_condition(args.cond)
    dense = propagate.densify(cond, power=args.power)
    clip = propagate.warp_clip(ref, dense)
    out = Path(args.out)
    paths = synth.write_frames(out, clip)
    summary = {
        "command": "preview",
        "out": str(out),
        "frames": len(paths),
    }
    if args.flow_out:
        write_flow_field(args.flow_out, dense, prefix="dense")
        summary["flow_out"] = str(args.flow_out)
    return _emit(summary)


def _cmd_train_toy(args) -> int:
    from .toynet import load_train_config, save_denoiser, train_toy

    cfg, model_cfg = load_train_config(args.config)
    data_root = Path(args.data)
    sample_dirs = sorted(d for d in data_root.iterdir() if d.is_dir())
    if not sample_dirs:
        raise ValueError(f"{data_root}: no sample directories")
    dataset = []
    for d in sample_dirs:
        clip = synth.read_frames(d / "frames")
        cond = condition.load_condition(d / "cond")
        dataset.append((clip, cond))
    model, losses = train_toy(dataset, cfg, model_config=model_cfg)
    save_denoiser(args.out, model)
    summary = {
        "command": "train-toy",
        "checkpoint": str(args.out),
        "samples": len(dataset),
        "steps": len(losses),
        "first_loss": losses[0],
        "final_loss": losses[-1],
    }
    if args.loss_csv:
        with open(args.loss_csv, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["step", "loss"])
            writer.writerows((i, f"{v:.10g}") for i, v in enumerate(losses))
        summary["loss_csv"] = str(args.loss_csv)
    return _emit(summary)


def _cmd_eval(args) -> int:
    clip = synth.read_frames(args.frames)
    reference = condition.load_tracks(args.tracks)
    if reference.length != clip.length:
        raise ValueError(
            f"{args.tracks}: track length {reference.length} != clip length {clip.length}"
        )
    flow = None
    if args.flow:
        flow = read_flow_field(args.flow, prefix=args.flow_prefix)
    if args.tracker == "oracle":
        if flow is None:
            raise ValueError("--tracker oracle needs --flow (the flow the clip was made from)")
        tracker = metrics.FlowTracker(flow)
        correspond = metrics.TrackerCorrespond(tracker)
    else:
        tracker = metrics.BlockMatchTracker()
        correspond = metrics.BlockMatchCorrespond()
    vid = metrics.md_vid(reference, clip, tracker)
    img = metrics.md_img(reference, clip, correspond)
    if args.embedder == "histogram":
        fc = metrics.frame_consistency(clip)
    else:
        vecs = np.load(args.embedder_file)
        fc = metrics.frame_consistency_vectors(vecs)
    report = {
        "command": "eval",
        "md_img": img.value,
        "md_vid": vid.value,
        "frame_consistency": fc,
        "avg_flow_magnitude": metrics.avg_flow_magnitude(flow) if flow is not None else None,
        "excluded_points": sorted(set(img.excluded) | set(vid.excluded)),
    }
    if args.report:
        with open(args.report, "w") as f:
            json.dump(report, f, indent=2)
            f.write("\n")
    return _emit(report)


def _cmd_camera(args) -> int:
    depth_path = Path(args.depth)
    if depth_path.suffix.lower() == ".pfm":
        depth = camproj.read_depth_pfm(depth_path)
    else:
        depth = camproj.read_depth_pgm16(depth_path)
    intr = camproj.Intrinsics(fx=args.fx, fy=args.fy, cx=args.cx, cy=args.cy)
    poses = camproj.load_poses(args.poses)
    result = camproj.pose_to_trajectories(depth, intr, poses, stride=args.stride)
    condition.save_tracks(args.out, result.tracks)
    summary = {
        "command": "camera",
        "out": str(args.out),
        "tracks": len(result.tracks),
        "dropped": result.dropped,
        "length": poses.length,
    }
    if args.mask_out:
        from .grid import write_pgm

        write_pgm(args.mask_out, result.mask.bits)
        summary["mask_out"] = str(args.mask_out)
    return _emit(summary)


def _cmd_serve(args) -> int:
    import uvicorn

    from .serve import build_app

    app = build_app(ttl=args.ttl)
    print(json.dumps({"command": "serve", "host": args.host, "port": args.port}))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> _Parser:
    seed_default = _env_seed()
    p = _Parser(prog="motioncond", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", help="TOML file preloading flag defaults per subcommand")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="render a scene JSON to frames + flow + visibility")
    sp.add_argument("--scene", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=_cmd_synth)

    cp = sub.add_parser("condition", help="build condition tensors from flow or strokes")
    cp.add_argument("--mode", choices=("train", "infer"), default="train")
    cp.add_argument("--flow", help="flow directory (train mode)")
    cp.add_argument("--vis", help="visibility directory (train mode)")
    cp.add_argument("--strokes", help="strokes JSON (infer mode)")
    cp.add_argument("--brush", help="brush mask PGM (infer mode)")
    cp.add_argument("--length", type=int, default=DEFAULT_LENGTH)
    cp.add_argument("--k", type=int, default=DEFAULT_K)
    cp.add_argument("--r-min", type=float, default=DEFAULT_R_MIN)
    cp.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
    cp.add_argument("--ratio-mode", choices=("masked", "keep"), default="masked")
    cp.add_argument("--seed", type=int, default=seed_default)
    cp.add_argument("--out", required=True)
    cp.set_defaults(func=_cmd_condition)

    pp = sub.add_parser("preview", help="densify a condition and warp the reference frame")
    pp.add_argument("--frame", required=True, help="reference PNG")
    pp.add_argument("--cond", required=True, help="condition directory")
    pp.add_argument("--out", required=True, help="output frame directory")
    pp.add_argument("--flow-out", help="also write the dense flow here")
    pp.add_argument("--power", type=float, default=2.0)
    pp.set_defaults(func=_cmd_preview)

    tp = sub.add_parser("train-toy", help="train the toy denoiser on a dataset directory")
    tp.add_argument("--data", required=True, help="directory of sample dirs (frames/ + cond/)")
    tp.add_argument("--train-config", dest="config", required=True, help="TOML training config")
    tp.add_argument("--out", required=True, help="checkpoint path")
    tp.add_argument("--loss-csv")
    tp.set_defaults(func=_cmd_train_toy)

    ep = sub.add_parser("eval", help="alignment metrics for a clip against reference tracks")
    ep.add_argument("--frames", required=True)
    ep.add_argument("--tracks", required=True, help="trajectory JSON")
    ep.add_argument("--tracker", choices=("oracle", "blockmatch"), default="blockmatch")
    ep.add_argument("--flow", help="flow directory for the oracle tracker / motion scalar")
    ep.add_argument("--flow-prefix", default="dense")
    ep.add_argument("--embedder", choices=("histogram", "file"), default="histogram")
    ep.add_argument("--embedder-file", help=".npy of per-frame feature vectors")
    ep.add_argument("--report", help="also write the metrics JSON here")
    ep.set_defaults(func=_cmd_eval)

    kp = sub.add_parser("camera", help="depth + poses -> trajectory JSON")
    kp.add_argument("--depth", required=True, help=".pgm (16-bit mm) or .pfm (meters)")
    kp.add_argument("--fx", type=float, required=True)
    kp.add_argument("--fy", type=float, required=True)
    kp.add_argument("--cx", type=float, required=True)
    kp.add_argument("--cy", type=float, required=True)
    kp.add_argument("--poses", required=True, help="pose JSON")
    kp.add_argument("--stride", type=int, default=camproj.DEFAULT_STRIDE)
    kp.add_argument("--out", required=True, help="trajectory JSON path")
    kp.add_argument("--mask-out", help="write the all-ones motion mask PGM here")
    kp.set_defaults(func=_cmd_camera)

    vp = sub.add_parser("serve", help="start the annotation HTTP service")
    vp.add_argument("--host", default="127.0.0.1")
    vp.add_argument("--port", type=int, default=8008)
    vp.add_argument("--ttl", type=float, default=3600.0, help="idle session eviction, seconds")
    vp.set_defaults(func=_cmd_serve)
    return p


def _apply_toml_defaults(parser: _Parser, argv: list) -> None:
    """Preload defaults from --config's section for the chosen subcommand."""
    path = None
    for i, a in enumerate(argv):
        if a == "--config":
            if i + 1 < len(argv):
                path = argv[i + 1]
            break
        if a.startswith("--config="):
            path = a.split("=", 1)[1]
            break
    if path is None:
        return  # absent, or missing value argparse will report
    if sys.version_info >= (3, 11):
        import tomllib
    else:
        import tomli as tomllib
    with open(path, "rb") as f:
        doc = tomllib.load(f)
    sub_actions = [a for a in parser._actions if isinstance(a, argparse._SubParsersAction)]
    names = set(sub_actions[0].choices) if sub_actions else set()
    chosen = next((a for a in argv if a in names), None)
    if chosen is None or chosen not in doc:
        return
    section = {k.replace("-", "_"): v for k, v in doc[chosen].items()}
    sub_actions[0].choices[chosen].set_defaults(**section)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        parser = build_parser()
        _apply_toml_defaults(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except BrokenPipeError:
        return 1
    except (ValueError, OSError, RuntimeError, json.JSONDecodeError, KeyError) as e:
        msg = str(e).replace("\n", " ")
        print(f"error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
