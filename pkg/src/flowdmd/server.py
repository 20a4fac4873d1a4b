"""HTTP service exposing a loaded model to the interactive editor.

One immutable base model is shared read-only across any number of edit
sessions. A session owns an edited copy of the model plus a reference
reduced state; frames are pure functions of (session state, k, field,
format), so repeated GETs are byte-identical until a force POST mutates
the session. Force injection is the single stateful path and is
serialized per session.

Endpoints (JSON request/response unless noted):

    GET    /api/model                          model metadata + spectrum
    POST   /api/session                        body: edit spec -> {session_id}
    GET    /api/session/{id}/frame?k=&field=&format=   binary frame payload
    POST   /api/session/{id}/force             localized impulse, advances 1 frame
    POST   /api/session/{id}/upres             guided upscale preview
    DELETE /api/session/{id}

Binary payloads carry a 12-byte header (u32 nx, u32 ny, u32 channels,
little-endian) followed by row-major planes: f32 for format=bin, u8
grayscale for format=raster.
"""

import json
import re
import threading
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

import numpy as np

from .editing import DEFAULT_CLUSTER_THRESHOLD, EditSpec, apply_edit, cluster_modes
from .errors import EigenvalueFloorError, FlowDmdError
from .grid import GridSpec, ScalarField, unflatten
from .runtime import INVERSE_FLOOR, ReducedState, decode, encode, step_forced, step_k
from .solver import advect_semi_lagrangian
from .upres import UpresConfig, build_projector, blend_fields, constrained_project, upres_step

_SESSION_RE = re.compile(r"^/api/session/([0-9a-f]{32})(/(frame|force|upres))?$")


def shift_state(model, z, delta, floor=INVERSE_FLOOR):
    """Move a coefficient vector by a signed number of frames."""
    if delta >= 0:
        return step_k(model, ReducedState(z, 0), delta).z
    mods = np.abs(model.lam)
    bad = np.flatnonzero(mods < floor)
    if bad.size:
        raise EigenvalueFloorError(
            f"inverse stepping blocked: modes {bad.tolist()} have |lambda| below {floor:g}",
            bad,
        )
    return model.lam ** float(delta) * z


class Session:
    def __init__(self, model, z_ref, frame_ref, density_ref):
        self.model = model
        self.z_ref = z_ref
        self.frame_ref = frame_ref
        self.density_ref = density_ref  # ScalarField at frame_ref, or None
        self.lock = threading.Lock()

    def snapshot(self):
        with self.lock:
            return self.z_ref.copy(), self.frame_ref, self.density_ref


def _default_density(grid):
    """Deterministic centered blob so density views work without a dataset."""
    j, i = np.meshgrid(np.arange(grid.ny), np.arange(grid.nx), indexing="ij")
    x = (i + 0.5) / grid.nx
    y = (j + 0.5) / grid.ny
    vals = np.exp(-(((x - 0.5) ** 2 + (y - 0.35) ** 2) / 0.02))
    return ScalarField(grid, vals)


class ModelServer:
    """Threaded HTTP server around one loaded model."""

    def __init__(self, model, dataset=None, density=None, host="127.0.0.1", port=0):
        self.model = model
        self.dataset = dataset
        self.density_frames = density
        self.host = host
        self.port = port
        self.sessions = {}
        self.sessions_lock = threading.Lock()
        self.projectors = {}
        self.projectors_lock = threading.Lock()
        self._httpd = None
        self._thread = None

    # -- lifecycle ---------------------------------------------------------

    def start(self):
        handler = _make_handler(self)
        self._httpd = ThreadingHTTPServer((self.host, self.port), handler)
        self._httpd.daemon_threads = True
        self.port = self._httpd.server_address[1]
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self.port

    def wait(self):
        if self._thread is not None:
            self._thread.join()

    def stop(self):
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()

    # -- session logic -----------------------------------------------------

    def model_info(self):
        model = self.model
        lam = model.lam
        freq = np.angle(lam) / model.dt
        low, high = cluster_modes(model, DEFAULT_CLUSTER_THRESHOLD)
        if isinstance(model.grid_meta, GridSpec):
            grid = {
                "kind": "grid",
                "nx": model.grid_meta.nx,
                "ny": model.grid_meta.ny,
                "h": model.grid_meta.h,
                "boundary": model.grid_meta.boundary,
            }
        else:
            grid = {"kind": "none"}
        return {
            "n": model.n,
            "r": model.r,
            "dt": model.dt,
            "grid": grid,
            "eigenvalues": [
                {
                    "re": float(l.real),
                    "im": float(l.imag),
                    "modulus": float(abs(l)),
                    "freq": float(f),
                }
                for l, f in zip(lam, freq)
            ],
            "clusters": {
                "threshold": DEFAULT_CLUSTER_THRESHOLD,
                "low": low.tolist(),
                "high": high.tolist(),
            },
        }

    def create_session(self, body):
        model = self.model
        r = model.r
        spec = EditSpec(
            body.get("weights", np.ones(r)),
            body.get("growth_scale", np.ones(r)),
            body.get("freq_scale", np.ones(r)),
            float(body.get("cluster_threshold", DEFAULT_CLUSTER_THRESHOLD)),
        )
        edited = apply_edit(model, spec)
        start = int(body.get("start_frame", 0))
        if self.dataset is not None:
            frames = self.dataset.states.shape[1]
            if not 0 <= start < frames:
                raise ValueError(f"start_frame {start} outside dataset (0..{frames - 1})")
            z0 = encode(edited, self.dataset.states[:, start]).z
        else:
            z0 = np.ones(r, dtype=np.complex128)
        density = None
        if isinstance(model.grid_meta, GridSpec):
            if self.density_frames is not None:
                density = ScalarField(model.grid_meta, self.density_frames[:, :, start])
            else:
                density = _default_density(model.grid_meta)
        sid = uuid.uuid4().hex
        with self.sessions_lock:
            self.sessions[sid] = Session(edited, z0, 0, density)
        return sid

    def get_session(self, sid):
        with self.sessions_lock:
            return self.sessions.get(sid)

    def delete_session(self, sid):
        with self.sessions_lock:
            return self.sessions.pop(sid, None) is not None

    def projector_for(self, factor):
        grid = self.model.grid_meta
        key = (grid.nx, grid.ny, factor)
        with self.projectors_lock:
            if key not in self.projectors:
                self.projectors[key] = build_projector(grid, factor)
            return self.projectors[key]

    def frame_payload(self, session, k, field, fmt):
        model = session.model
        grid = model.grid_meta
        if not isinstance(grid, GridSpec):
            raise ValueError("model has no grid metadata; frames unavailable")
        z_ref, frame_ref, density_ref = session.snapshot()
        z = shift_state(model, z_ref, k - frame_ref)
        flat = decode(model, z)
        vel = unflatten(flat, grid)
        if field == "velocity":
            uc = 0.5 * (vel.u[:, :-1] + vel.u[:, 1:])
            vc = 0.5 * (vel.v[:-1, :] + vel.v[1:, :])
            planes = np.stack([uc, vc])
        elif field == "speed":
            uc = 0.5 * (vel.u[:, :-1] + vel.u[:, 1:])
            vc = 0.5 * (vel.v[:-1, :] + vel.v[1:, :])
            planes = np.sqrt(uc * uc + vc * vc)[None, :, :]
        elif field == "density":
            if density_ref is None:
                raise ValueError("no density available for this session")
            planes = self._advected_density(model, z_ref, frame_ref, density_ref, k)[
                None, :, :
            ]
        else:
            raise ValueError(f"unknown field {field!r}")
        return _encode_planes(planes, fmt)

    def _advected_density(self, model, z_ref, frame_ref, density_ref, k):
        density = density_ref
        z = z_ref
        steps = k - frame_ref
        sign = 1 if steps >= 0 else -1
        for _ in range(abs(steps)):
            z = shift_state(model, z, sign)
            vel = unflatten(decode(model, z), model.grid_meta)
            density = advect_semi_lagrangian(vel, density, sign * model.dt)
        return density.values

    def apply_force(self, session, body):
        model = session.model
        grid = model.grid_meta
        if not isinstance(grid, GridSpec):
            raise ValueError("model has no grid metadata; forcing unavailable")
        x = float(body["x"])
        y = float(body["y"])
        dx = float(body["dx"])
        dy = float(body["dy"])
        radius = float(body.get("radius", 4 * grid.h))
        scale = float(body.get("scale", 1.0))
        if radius <= 0:
            raise ValueError("radius must be positive")
        force = _impulse_vector(grid, x, y, dx, dy, radius, scale)
        with session.lock:
            state = ReducedState(session.z_ref, session.frame_ref)
            new = step_forced(model, None, state, f=[force])
            session.z_ref = new.z
            session.frame_ref = new.frame
            if session.density_ref is not None:
                vel = unflatten(decode(model, new), grid)
                session.density_ref = advect_semi_lagrangian(
                    vel, session.density_ref, model.dt
                )
            return session.frame_ref

    def upres_preview(self, session, body):
        model = session.model
        factor = int(body["factor"])
        split = int(body["split"])
        project = bool(body.get("project", True))
        low = np.asarray(body["low"], dtype=np.float64)
        cfg = UpresConfig(split=split, factor=factor)
        z_ref, frame_ref, _ = session.snapshot()
        state = ReducedState(z_ref, frame_ref)
        new_state, H = upres_step(model, state, low, cfg)
        if project:
            proj = self.projector_for(factor)
            x = constrained_project(proj, H, low)
            H = blend_fields(x, H, model, cfg)
        vel = unflatten(H, model.grid_meta)
        uc = 0.5 * (vel.u[:, :-1] + vel.u[:, 1:])
        vc = 0.5 * (vel.v[:-1, :] + vel.v[1:, :])
        fmt = body.get("format", "bin")
        field = body.get("field", "speed")
        if field == "velocity":
            planes = np.stack([uc, vc])
        else:
            planes = np.sqrt(uc * uc + vc * vc)[None, :, :]
        return _encode_planes(planes, fmt)


def _impulse_vector(grid, x, y, dx, dy, radius, scale):
    """Flat force vector: a smooth bump of (dx, dy) * scale around (x, y)."""
    from .solver import _component_positions

    xu, yu = _component_positions(grid, "u")
    xv, yv = _component_positions(grid, "v")
    r2 = radius * radius
    fall_u = np.maximum(0.0, 1.0 - ((xu - x) ** 2 + (yu - y) ** 2) / r2)
    fall_v = np.maximum(0.0, 1.0 - ((xv - x) ** 2 + (yv - y) ** 2) / r2)
    fu = dx * scale * fall_u
    fv = dy * scale * fall_v
    return np.concatenate([fu.ravel(), fv.ravel()])


def _encode_planes(planes, fmt):
    channels, ny, nx = planes.shape
    header = np.asarray([nx, ny, channels], dtype="<u4").tobytes()
    if fmt == "bin":
        return header + planes.astype("<f4").tobytes(), "application/octet-stream"
    if fmt == "raster":
        lo = planes.min()
        hi = planes.max()
        span = hi - lo
        if span <= 0:
            data = np.zeros(planes.shape, dtype=np.uint8)
        else:
            data = np.clip((planes - lo) / span * 255.0, 0, 255).astype(np.uint8)
        return header + data.tobytes(), "application/octet-stream"
    raise ValueError(f"unknown format {fmt!r}")


def _make_handler(server):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet by default
            pass

        # -- helpers -------------------------------------------------------

        def _send(self, code, body, content_type="application/json"):
            self.send_response(code)
            self.send_header("Content-Type", content_type)
            self.send_header("Content-Length", str(len(body)))
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "Content-Type")
            self.end_headers()
            self.wfile.write(body)

        def _json(self, code, obj):
            self._send(code, json.dumps(obj).encode("utf-8"))

        def _error(self, code, message, extra=None):
            obj = {"error": message}
            if extra:
                obj.update(extra)
            self._json(code, obj)

        def _read_body(self):
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length) if length else b""
            if not raw:
                return {}
            try:
                body = json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise ValueError(f"malformed JSON body: {exc}") from exc
            if not isinstance(body, dict):
                raise ValueError("body must be a JSON object")
            return body

        def _session_or_404(self, sid):
            session = server.get_session(sid)
            if session is None:
                self._error(404, f"unknown session {sid}")
            return session

        # -- methods -------------------------------------------------------

        def do_OPTIONS(self):
            self._send(204, b"", "text/plain")

        def do_GET(self):
            try:
                parsed = urlparse(self.path)
                if parsed.path == "/api/model":
                    self._json(200, server.model_info())
                    return
                m = _SESSION_RE.match(parsed.path)
                if m and m.group(3) == "frame":
                    session = self._session_or_404(m.group(1))
                    if session is None:
                        return
                    qs = parse_qs(parsed.query)
                    k = int(qs.get("k", ["0"])[0])
                    field = qs.get("field", ["speed"])[0]
                    fmt = qs.get("format", ["bin"])[0]
                    payload, ctype = server.frame_payload(session, k, field, fmt)
                    self._send(200, payload, ctype)
                    return
                self._error(404, f"no route for {parsed.path}")
            except EigenvalueFloorError as exc:
                self._error(409, str(exc), {"blocked_modes": exc.mode_indices})
            except (ValueError, KeyError) as exc:
                self._error(400, str(exc))
            except FlowDmdError as exc:
                self._error(500, str(exc))
            except Exception as exc:  # pragma: no cover - diagnostic path
                self._error(500, f"internal error: {exc}")

        def do_POST(self):
            try:
                parsed = urlparse(self.path)
                if parsed.path == "/api/session":
                    body = self._read_body()
                    sid = server.create_session(body)
                    self._json(200, {"session_id": sid})
                    return
                m = _SESSION_RE.match(parsed.path)
                if m and m.group(3) == "force":
                    session = self._session_or_404(m.group(1))
                    if session is None:
                        return
                    frame = server.apply_force(session, self._read_body())
                    self._json(200, {"frame": frame})
                    return
                if m and m.group(3) == "upres":
                    session = self._session_or_404(m.group(1))
                    if session is None:
                        return
                    payload, ctype = server.upres_preview(session, self._read_body())
                    self._send(200, payload, ctype)
                    return
                self._error(404, f"no route for {parsed.path}")
            except EigenvalueFloorError as exc:
                self._error(409, str(exc), {"blocked_modes": exc.mode_indices})
            except (ValueError, KeyError) as exc:
                self._error(400, str(exc))
            except FlowDmdError as exc:
                self._error(500, str(exc))
            except Exception as exc:  # pragma: no cover - diagnostic path
                self._error(500, f"internal error: {exc}")

        def do_DELETE(self):
            parsed = urlparse(self.path)
            m = _SESSION_RE.match(parsed.path)
            if m and m.group(3) is None:
                if server.delete_session(m.group(1)):
                    self._json(200, {"deleted": True})
                else:
                    self._error(404, f"unknown session {m.group(1)}")
                return
            self._error(404, f"no route for {parsed.path}")

    return Handler
