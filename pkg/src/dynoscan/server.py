"""HTTP service backing the annotation UI.

Serves frame renders and range data, runs single-seed region growing on
demand (the same code path as batch segmentation, so interactive labels match
batch labels bit for bit), and persists per-frame labels to one JSONL file
with atomic replace.  Pure stdlib; CORS is open so a dev-served frontend can
talk to it.
"""

from __future__ import annotations

import io
import json
import os
import threading
from functools import lru_cache
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .config import PipelineConfig
from .foreground import build_kernel, extract_foreground
from .frames import project
from .labels import DynamicLabel, encode_label_line, read_labels_jsonl, write_labels_jsonl
from .segmentation import estimate_ground_plane, region_grow

IMAGE_CACHE = 32


class LabelStore:
    """Per-frame labels persisted as one JSONL file, rewritten atomically.

    Writes are serialized under one lock, which subsumes the per-frame-index
    ordering requirement.  Labels rebind to frame indices by timestamp when
    the store is reopened.
    """

    def __init__(self, path, timestamps: list[float]):
        self.path = path
        self.timestamps = timestamps
        self._lock = threading.Lock()
        self._labels: dict[int, DynamicLabel] = {}
        if path and os.path.exists(path):
            by_time = {t: i for i, t in enumerate(timestamps)}
            for label in read_labels_jsonl(path):
                idx = by_time.get(label.timestamp)
                if idx is None:
                    deltas = [abs(t - label.timestamp) for t in timestamps]
                    best = int(np.argmin(deltas)) if deltas else None
                    idx = best if best is not None and deltas[best] < 1e-6 else None
                if idx is not None:
                    self._labels[idx] = label

    def get(self, index: int) -> DynamicLabel:
        with self._lock:
            return self._labels.get(index, DynamicLabel(self.timestamps[index]))

    def put(self, index: int, label: DynamicLabel) -> None:
        with self._lock:
            self._labels[index] = label
            if self.path:
                tmp = self.path + ".tmp"
                write_labels_jsonl(
                    [self._labels[i] for i in sorted(self._labels)], tmp)
                os.replace(tmp, self.path)


class _State:
    def __init__(self, source, config: PipelineConfig, labels_path):
        self.source = source
        self.config = config
        self.sensor = config.sensor()
        self.kernel = build_kernel(config.kernel_a, config.kernel_b,
                                   config.sigma_m, config.sigma_n)
        timestamps = getattr(source, "timestamps", None)
        if timestamps is None:
            timestamps = [f.timestamp for f in source]
        self.timestamps = list(timestamps)
        self.labels = LabelStore(labels_path, self.timestamps)
        self._frame_data = lru_cache(maxsize=IMAGE_CACHE)(self._build)

    def __len__(self) -> int:
        return len(self.timestamps)

    def frame(self, i):
        if hasattr(self.source, "frame"):
            return self.source.frame(i)
        return self.source[i]

    def _build(self, i: int):
        frame = self.frame(i)
        image = project(frame, self.sensor)
        plane = estimate_ground_plane(frame, self.config.ground_iterations,
                                      self.config.plane_tolerance,
                                      self.config.ground_seed)
        return image, plane

    def image(self, i: int):
        return self._frame_data(i)[0]

    def plane(self, i: int):
        return self._frame_data(i)[1]


def _render_png(image) -> bytes:
    from PIL import Image
    from .frames import normalize_u8
    buf = io.BytesIO()
    Image.fromarray(normalize_u8(image.intensity), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def _make_handler(state: _State):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):   # quiet by default
            pass

        def _cors(self):
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, PUT, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")

        def _reply(self, code: int, body: bytes, ctype: str = "application/json"):
            self.send_response(code)
            self._cors()
            self.send_header("Content-Type", ctype)
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def _json(self, code: int, obj):
            self._reply(code, json.dumps(obj).encode("utf-8"))

        def _error(self, code: int, message: str):
            self._json(code, {"error": message})

        def _frame_index(self, token: str) -> int | None:
            try:
                i = int(token)
            except ValueError:
                return None
            return i if 0 <= i < len(state) else None

        def _read_body(self):
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length) if length else b""
            try:
                return json.loads(raw)
            except json.JSONDecodeError:
                return None

        def do_OPTIONS(self):
            self.send_response(204)
            self._cors()
            self.send_header("Content-Length", "0")
            self.end_headers()

        def do_GET(self):
            parts = [p for p in self.path.split("?")[0].split("/") if p]
            if parts == ["meta"]:
                s = state.sensor
                return self._json(200, {
                    "frames": len(state),
                    "sensor": {"w": s.w, "h": s.h, "beta_up": s.beta_up,
                               "beta_fov": s.beta_fov, "rate_hz": s.rate_hz},
                    "timestamps": state.timestamps,
                    "grow_eps": state.config.grow_eps,
                })
            if len(parts) == 2 and parts[0] == "labels":
                i = self._frame_index(parts[1])
                if i is None:
                    return self._error(404, "frame out of range")
                return self._reply(200, encode_label_line(state.labels.get(i)).encode())
            if len(parts) == 3 and parts[0] == "frames":
                i = self._frame_index(parts[1])
                if i is None:
                    return self._error(404, "frame out of range")
                if parts[2] == "intensity.png":
                    return self._reply(200, _render_png(state.image(i)), "image/png")
                if parts[2] == "range.bin":
                    data = state.image(i).range.astype("<f4").tobytes()
                    return self._reply(200, data, "application/octet-stream")
                if parts[2] == "foreground":
                    fg = extract_foreground(state.image(i), state.frame(i).xyz,
                                            state.kernel, state.config.theta)
                    idx = np.flatnonzero(fg.mask.ravel())
                    return self._json(200, {"indices": [int(x) for x in idx]})
            return self._error(404, "unknown route")

        def do_POST(self):
            parts = [p for p in self.path.split("?")[0].split("/") if p]
            if len(parts) == 3 and parts[0] == "frames" and parts[2] == "grow":
                i = self._frame_index(parts[1])
                if i is None:
                    return self._error(404, "frame out of range")
                body = self._read_body()
                if (not isinstance(body, dict) or "u" not in body or "v" not in body):
                    return self._error(400, "body must be {u, v, eps?}")
                try:
                    u, v = int(body["u"]), int(body["v"])
                    eps = float(body.get("eps", state.config.grow_eps))
                    if eps <= 0:
                        raise ValueError("eps must be positive")
                except (TypeError, ValueError) as exc:
                    return self._error(400, str(exc))
                s = state.sensor
                if not (0 <= u < s.w and 0 <= v < s.h):
                    return self._error(400, "pixel outside the image grid")
                image = state.image(i)
                if not image.occupied[v, u]:
                    return self._error(422, "pixel has no point")
                grown = region_grow(image, [(u, v)], s, state.plane(i), eps,
                                    state.config.grow_max_points)
                return self._json(200, {"indices": [int(x) for x in grown.label.indices],
                                        "truncated": grown.truncated})
            return self._error(404, "unknown route")

        def do_PUT(self):
            parts = [p for p in self.path.split("?")[0].split("/") if p]
            if len(parts) == 2 and parts[0] == "labels":
                i = self._frame_index(parts[1])
                if i is None:
                    return self._error(404, "frame out of range")
                body = self._read_body()
                if not isinstance(body, dict) or "t" not in body or "idx" not in body:
                    return self._error(400, "body must be {t, idx}")
                try:
                    t = float(body["t"])
                    idx = sorted(set(int(x) for x in body["idx"]))
                except (TypeError, ValueError):
                    return self._error(400, "bad label fields")
                if abs(t - state.timestamps[i]) > 1e-9:
                    return self._error(400, "timestamp does not match the frame")
                s = state.sensor
                if idx and (idx[0] < 0 or idx[-1] >= s.w * s.h):
                    return self._error(400, "index outside the image grid")
                label = DynamicLabel(t, np.array(idx, dtype=np.uint32))
                state.labels.put(i, label)
                return self._json(200, {"ok": True, "count": len(label)})
            return self._error(404, "unknown route")

    return Handler


class AnnotationServer:
    """Owns the ThreadingHTTPServer; construct, then serve_forever or run in
    a thread via start()."""

    def __init__(self, source, config: PipelineConfig, labels_path=None,
                 host: str = "127.0.0.1", port: int = 0):
        self.state = _State(source, config, labels_path)
        self.httpd = ThreadingHTTPServer((host, port), _make_handler(self.state))
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.httpd.server_address[1]

    def start(self) -> None:
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()

    def serve_forever(self) -> None:
        self.httpd.serve_forever()

    def shutdown(self) -> None:
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
