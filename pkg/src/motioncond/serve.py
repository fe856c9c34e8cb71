"""Session-scoped HTTP service backing the annotation UI.

A session holds one reference image, a brush mask, trajectory strokes, and a
small config (k, length, threshold, power). Derived artifacts (condition
tensors, preview frames, metrics) are cached per session and invalidated by
any mutation. Responses are a pure function of the session's inputs and are
byte-identical to the file-based command-line pipeline on the same inputs:
binary payloads go through the same encoders, and stroke displacements pass
through the same float32 storage quantization the .flo files apply.

Concurrency: one lock per session serializes all requests touching it;
distinct sessions never contend. Sessions are in-memory and evicted lazily
after `ttl` seconds of inactivity.

Endpoints (JSON unless noted):
  POST   /session                  -> {"id": ...}
  POST   /session/{id}/image        raw PNG body
  PUT    /session/{id}/mask         raw PNG body, or run-length JSON
                                    {"version": 1, "height": H, "width": W,
                                     "runs": [[start, length], ...]} over the
                                    row-major flattened grid
  PUT    /session/{id}/strokes      {"version": 1, "strokes": [{"points": [[x, y], ...]}, ...]}
  PUT    /session/{id}/config       any of {"k", "length", "threshold", "power"}
  GET    /session/{id}/condition   -> base64 manifest of traj_%04d.flo + mask.pgm
  GET    /session/{id}/preview     -> base64 PNG frames
  GET    /session/{id}/metrics     -> alignment metrics of the preview against the strokes
  DELETE /session/{id}

Errors: 404 unknown session; 400 malformed payload (message names the field);
409 preview/metrics with empty strokes inside a nonempty mask, or a stroke
set that constrains no motion ("unconstrained motion region").
"""

from __future__ import annotations

import base64
import io
import json
import secrets
import threading
import time

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from PIL import Image

from . import condition as cond_mod
from . import metrics as metrics_mod
from . import propagate
from .grid import BitMask2D, FlowField, VideoClip, encode_flo, encode_pgm
from .synth import encode_frame_png

DEFAULT_TTL = 3600.0
DEFAULT_CONFIG = {"k": 8, "length": 16, "threshold": 1.0, "power": 2.0}
PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


class Session:
    def __init__(self, sid: str):
        self.id = sid
        self.lock = threading.Lock()
        self.touched = time.monotonic()
        self.image = None  # (H, W, 3) float64 in [0, 1]
        self.mask = None  # (H, W) uint8, allocated with the image
        self.strokes = []  # list of (N, 2) float64 vertex arrays
        self.config = dict(DEFAULT_CONFIG)
        self.cache = {}  # derived artifacts, cleared on any mutation


class SessionStore:
    def __init__(self, ttl: float):
        self.ttl = ttl
        self.lock = threading.Lock()
        self.sessions = {}

    def create(self) -> Session:
        with self.lock:
            self._evict()
            sid = secrets.token_hex(8)
            while sid in self.sessions:  # vanishing odds, cheap insurance
                sid = secrets.token_hex(8)
            sess = Session(sid)
            self.sessions[sid] = sess
            return sess

    def get(self, sid: str) -> Session:
        with self.lock:
            self._evict()
            sess = self.sessions.get(sid)
            if sess is None:
                raise HTTPException(status_code=404, detail=f"unknown session {sid!r}")
            sess.touched = time.monotonic()
            return sess

    def delete(self, sid: str) -> None:
        with self.lock:
            if self.sessions.pop(sid, None) is None:
                raise HTTPException(status_code=404, detail=f"unknown session {sid!r}")

    def _evict(self) -> None:
        now = time.monotonic()
        stale = [k for k, s in self.sessions.items() if now - s.touched > self.ttl]
        for k in stale:
            del self.sessions[k]


def _bad(field: str, why: str) -> HTTPException:
    return HTTPException(status_code=400, detail=f"{field}: {why}")


def _decode_png_image(data: bytes):
    if not data.startswith(PNG_SIGNATURE):
        raise _bad("body", "not a PNG (bad signature)")
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as e:
        raise _bad("body", f"PNG decode failed: {e}") from None
    return img


def _decode_mask(data: bytes, shape) -> np.ndarray:
    """PNG (nonzero luminance = 1) or run-length JSON, matched to `shape`."""
    h, w = shape
    if data.startswith(PNG_SIGNATURE):
        img = _decode_png_image(data)
        if img.size != (w, h):
            raise _bad("mask", f"size {img.size[1]}x{img.size[0]} does not match image {h}x{w}")
        return (np.asarray(img.convert("L")) != 0).astype(np.uint8)
    try:
        doc = json.loads(data)
    except ValueError:
        raise _bad("mask", "neither PNG nor JSON") from None
    if doc.get("version") != 1:
        raise _bad("mask.version", f"unsupported value {doc.get('version')!r}")
    if doc.get("height") != h or doc.get("width") != w:
        raise _bad("mask", f"declared {doc.get('height')}x{doc.get('width')} does not match image {h}x{w}")
    flat = np.zeros(h * w, dtype=np.uint8)
    runs = doc.get("runs")
    if not isinstance(runs, list):
        raise _bad("mask.runs", "must be a list of [start, length] pairs")
    for i, run in enumerate(runs):
        try:
            start, length = int(run[0]), int(run[1])
        except (TypeError, ValueError, IndexError):
            raise _bad(f"mask.runs[{i}]", "must be a [start, length] pair") from None
        if length < 1 or start < 0 or start + length > h * w:
            raise _bad(f"mask.runs[{i}]", f"[{start}, {length}] leaves the {h * w}-pixel grid")
        flat[start : start + length] = 1
    return flat.reshape(h, w)


def _decode_strokes(data: bytes, shape) -> list:
    h, w = shape
    try:
        doc = json.loads(data)
    except ValueError as e:
        raise _bad("strokes", f"invalid JSON: {e}") from None
    if doc.get("version") != 1:
        raise _bad("strokes.version", f"unsupported value {doc.get('version')!r}")
    raw = doc.get("strokes")
    if not isinstance(raw, list):
        raise _bad("strokes.strokes", "must be a list")
    out = []
    for i, entry in enumerate(raw):
        pts = entry.get("points") if isinstance(entry, dict) else None
        if not pts:
            raise _bad(f"strokes.strokes[{i}].points", "missing or empty")
        arr = np.asarray(pts, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 2 or not np.all(np.isfinite(arr)):
            raise _bad(f"strokes.strokes[{i}].points", "must be finite [x, y] pairs")
        if arr[:, 0].min() < 0 or arr[:, 0].max() > w - 1 or arr[:, 1].min() < 0 or arr[:, 1].max() > h - 1:
            raise _bad(f"strokes.strokes[{i}].points", "leaves the image canvas")
        out.append(arr)
    return out


def _require_image(sess: Session) -> None:
    if sess.image is None:
        raise _bad("session", "no reference image uploaded")


def _session_condition(sess: Session):
    """Rasterized condition tensors, float32-quantized like the .flo files."""
    if "condition" not in sess.cache:
        _require_image(sess)
        if not sess.strokes:
            raise _bad("strokes", "no strokes set")
        try:
            raw = cond_mod.rasterize_user_trajectory(
                sess.strokes, sess.config["length"], sess.config["k"], BitMask2D(sess.mask)
            )
        except ValueError as e:
            raise _bad("strokes", str(e)) from None
        sess.cache["condition"] = cond_mod.ConditionTensors(
            traj=raw.traj.astype(np.float32).astype(np.float64),
            mask_seq=raw.mask_seq,
        )
    return sess.cache["condition"]


def _session_preview(sess: Session):
    """(dense FlowField or None, VideoClip-like frames array, PNG bytes list)."""
    if "preview" not in sess.cache:
        _require_image(sess)
        length = sess.config["length"]
        if not sess.strokes:
            if sess.mask is not None and sess.mask.any():
                raise HTTPException(
                    status_code=409,
                    detail="unconstrained motion region: mask is nonempty but no strokes are set",
                )
            frames = np.repeat(sess.image[None], length, axis=0)
            dense = None
        else:
            cond = _session_condition(sess)
            try:
                dense = propagate.densify(cond, power=sess.config["power"])
            except ValueError as e:
                status = 409 if str(e).startswith("unconstrained motion region") else 400
                raise HTTPException(status_code=status, detail=str(e)) from None
            frames = propagate.warp_clip(sess.image, dense).frames
        pngs = [encode_frame_png(f) for f in frames]
        sess.cache["preview"] = (dense, frames, pngs)
    return sess.cache["preview"]


def build_app(ttl: float = DEFAULT_TTL) -> FastAPI:
    app = FastAPI(title="motioncond annotation service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    store = SessionStore(ttl)
    app.state.store = store

    @app.post("/session")
    def create_session():
        return {"id": store.create().id}

    @app.delete("/session/{sid}")
    def delete_session(sid: str):
        store.delete(sid)
        return {"deleted": sid}

    @app.post("/session/{sid}/image")
    async def set_image(sid: str, request: Request):
        data = await request.body()
        img = _decode_png_image(data)
        arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
        sess = store.get(sid)
        with sess.lock:
            sess.image = arr
            sess.mask = np.zeros(arr.shape[:2], dtype=np.uint8)
            sess.strokes = []
            sess.cache.clear()
            return {"height": arr.shape[0], "width": arr.shape[1]}

    @app.put("/session/{sid}/mask")
    async def set_mask(sid: str, request: Request):
        data = await request.body()
        sess = store.get(sid)
        with sess.lock:
            _require_image(sess)
            sess.mask = _decode_mask(data, sess.image.shape[:2])
            sess.cache.clear()
            return {"mask_px": int(sess.mask.sum())}

    @app.put("/session/{sid}/strokes")
    async def set_strokes(sid: str, request: Request):
        data = await request.body()
        sess = store.get(sid)
        with sess.lock:
            _require_image(sess)
            sess.strokes = _decode_strokes(data, sess.image.shape[:2])
            sess.cache.clear()
            return {"strokes": len(sess.strokes)}

    @app.put("/session/{sid}/config")
    async def set_config(sid: str, request: Request):
        data = await request.body()
        try:
            doc = json.loads(data)
        except ValueError as e:
            raise _bad("config", f"invalid JSON: {e}") from None
        if not isinstance(doc, dict):
            raise _bad("config", "must be a JSON object")
        sess = store.get(sid)
        with sess.lock:
            merged = dict(sess.config)
            for key, value in doc.items():
                if key not in DEFAULT_CONFIG:
                    raise _bad(f"config.{key}", "unknown field")
                if key in ("k", "length"):
                    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                        raise _bad(f"config.{key}", "must be a positive integer")
                    if key == "length" and value < 2:
                        raise _bad("config.length", "must be at least 2")
                else:
                    if not isinstance(value, (int, float)) or isinstance(value, bool) or not np.isfinite(value):
                        raise _bad(f"config.{key}", "must be a finite number")
                    value = float(value)
                merged[key] = value
            sess.config = merged
            sess.cache.clear()
            return {"config": sess.config}

    @app.get("/session/{sid}/condition")
    def get_condition(sid: str):
        sess = store.get(sid)
        with sess.lock:
            cond = _session_condition(sess)
            n, h, w, _ = cond.traj.shape
            files = {
                f"traj_{i + 1:04d}.flo": base64.b64encode(encode_flo(cond.traj[i])).decode("ascii")
                for i in range(n)
            }
            files["mask.pgm"] = base64.b64encode(
                encode_pgm(cond.mask_seq[0, :, :, 0])
            ).decode("ascii")
            return {"length": n, "height": h, "width": w, "files": files}

    @app.get("/session/{sid}/preview")
    def get_preview(sid: str):
        sess = store.get(sid)
        with sess.lock:
            _, frames, pngs = _session_preview(sess)
            return {
                "frames": [base64.b64encode(p).decode("ascii") for p in pngs],
                "length": len(pngs),
                "height": frames.shape[1],
                "width": frames.shape[2],
            }

    @app.get("/session/{sid}/metrics")
    def get_metrics(sid: str):
        sess = store.get(sid)
        with sess.lock:
            _require_image(sess)
            if not sess.strokes:
                raise _bad("strokes", "metrics need at least one stroke")
            dense, frames, _ = _session_preview(sess)
            # score the exported artifacts, not the in-memory intermediates:
            # frames as their 8-bit PNG payloads, flow as its float32 storage
            clip = VideoClip(np.clip(np.rint(frames * 255.0), 0, 255) / 255.0)
            stored = FlowField(dense.flow.astype(np.float32).astype(np.float64))
            reference = cond_mod.tracks_from_strokes(sess.strokes, sess.config["length"])
            tracker = metrics_mod.FlowTracker(stored)
            img = metrics_mod.md_img(reference, clip, metrics_mod.TrackerCorrespond(tracker))
            vid = metrics_mod.md_vid(reference, clip, tracker)
            return {
                "md_img": img.value,
                "md_vid": vid.value,
                "frame_consistency": metrics_mod.frame_consistency(clip),
                "avg_flow_magnitude": metrics_mod.avg_flow_magnitude(stored),
                "excluded_points": sorted(set(img.excluded) | set(vid.excluded)),
            }

    return app
