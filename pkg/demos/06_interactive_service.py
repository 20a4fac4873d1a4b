# Tour the HTTP service that backs the browser editor.
#
# A session wraps an edited copy of the model plus a reference state.
# Frames at any signed time index are fetched with GET; dragging a
# force impulse is a POST that advances the session one frame.
#
# Run from the repository root:  python demos/06_interactive_service.py

import json
from http.client import HTTPConnection

import numpy as np

from flowdmd import SceneConfig, exact_dmd, generate_dataset
from flowdmd.server import ModelServer

scene = SceneConfig(kind="plume", nx=32, ny=64, h=1.0 / 32, frames=80, dt=0.05)
snapshots, density = generate_dataset(scene)
model = exact_dmd(snapshots, 12)

server = ModelServer(model, dataset=snapshots, density=density)
port = server.start()
print(f"service listening on 127.0.0.1:{port}")


def call(method, path, body=None):
    conn = HTTPConnection("127.0.0.1", port)
    conn.request(method, path, body=None if body is None else json.dumps(body).encode())
    resp = conn.getresponse()
    data = resp.read()
    conn.close()
    return resp.status, data


status, raw = call("GET", "/api/model")
info = json.loads(raw)
print(f"model: n={info['n']}, r={info['r']}, "
      f"{len(info['clusters']['low'])} low / {len(info['clusters']['high'])} high modes")

# an edit session that damps the high-frequency cluster
weights = [1.0] * info["r"]
for i in info["clusters"]["high"]:
    weights[i] = 0.6
status, raw = call("POST", "/api/session", {"weights": weights, "start_frame": 40})
sid = json.loads(raw)["session_id"]
print(f"session {sid[:8]}... created with damped high cluster")

status, frame = call("GET", f"/api/session/{sid}/frame?k=10&field=speed&format=raster")
nx, ny, ch = np.frombuffer(frame[:12], dtype="<u4")
print(f"frame k=10: {nx}x{ny} raster, {len(frame) - 12} bytes of pixels")

# a strong drag across the plume column; f32 payloads show the response
status, before = call("GET", f"/api/session/{sid}/frame?k=10&field=speed&format=bin")
status, raw = call(
    "POST",
    f"/api/session/{sid}/force",
    {"x": 0.5, "y": 1.0, "dx": 1.0, "dy": 0.3, "radius": 0.4, "scale": 25.0},
)
print(f"force impulse applied, session now at frame {json.loads(raw)['frame']}")

status, after = call("GET", f"/api/session/{sid}/frame?k=10&field=speed&format=bin")
a = np.frombuffer(before[12:], dtype="<f4")
b = np.frombuffer(after[12:], dtype="<f4")
print(f"same k after the impulse differs: {not np.array_equal(a, b)} "
      f"(relative change {np.linalg.norm(b - a) / np.linalg.norm(a):.2%})")

call("DELETE", f"/api/session/{sid}")
server.stop()
print("session deleted, server stopped")
