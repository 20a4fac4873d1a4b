# Jump to any point in time with one elementwise power.
#
# Because the step operator is diagonal in the mode basis, the state k
# frames ahead is lambda**k * z: no time integration, no advection. The
# continuous-time form exp(Omega * t) agrees at integer multiples of dt
# and also evaluates between frames.
#
# Run from the repository root:  python demos/02_arbitrary_time.py

import time

import numpy as np

from flowdmd import SceneConfig, exact_dmd, generate_dataset
from flowdmd.runtime import decode, encode, eval_continuous, step, step_k

scene = SceneConfig(kind="plume", nx=48, ny=96, h=1.0 / 48, frames=120, dt=0.05)
snapshots, _ = generate_dataset(scene)
model = exact_dmd(snapshots, 24)
z0 = encode(model, snapshots.states[:, 10])

# one jump of 100 frames vs 100 single steps
t = time.perf_counter()
jumped = step_k(model, z0, 100)
jump_time = time.perf_counter() - t

t = time.perf_counter()
walked = z0
for _ in range(100):
    walked = step(model, walked)
walk_time = time.perf_counter() - t

gap = np.linalg.norm(jumped.z - walked.z) / np.linalg.norm(walked.z)
print(f"single power jump vs 100 steps: relative gap {gap:.2e}")
print(f"jump {jump_time * 1e6:.1f} us, walk {walk_time * 1e6:.1f} us")

# continuous time: land exactly on a frame, then halfway between frames
on_frame = eval_continuous(model, z0, 100 * model.dt)
print(
    "exp(Omega * 100 dt) vs lambda**100:",
    f"{np.linalg.norm(on_frame.z - jumped.z) / np.linalg.norm(jumped.z):.2e}",
)
half = eval_continuous(model, z0, 10.5 * model.dt)
a = decode(model, step_k(model, z0, 10))
b = decode(model, step_k(model, z0, 11))
mid = decode(model, half)
print(
    "frame 10.5 sits between frames 10 and 11:",
    f"|mid-a| {np.linalg.norm(mid - a):.4f}, |mid-b| {np.linalg.norm(mid - b):.4f}",
)
