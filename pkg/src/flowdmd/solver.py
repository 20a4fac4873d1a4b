"""Full-space 2D smoke solver used to generate training data and ground truth.

Pipeline per step: emit sources, advect velocity and scalars
(MacCormack with extrema clamping), add buoyancy, add vorticity
confinement, then make the field divergence-free with a conjugate
gradient pressure solve. Wall and obstacle faces are re-masked after
every substep. Everything is plain vectorized numpy and deterministic
for a fixed configuration.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError
from .grid import (
    GridSpec,
    MacField,
    ScalarField,
    apply_solid_mask,
    divergence,
    flatten,
)


@dataclass
class Emitter:
    """Disk source adding smoke density and temperature at constant rates."""

    cx: float
    cy: float
    radius: float
    density_rate: float = 1.0
    temperature_rate: float = 1.0


@dataclass
class SimParams:
    dt: float
    buoyancy_alpha: float = 0.0
    buoyancy_beta: float = 0.0
    vorticity_eps: float = 0.0
    cg_tol: float = 1e-6
    cg_max_iters: int = 1000
    source: Emitter | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not 0 < self.cg_tol < 1:
            raise ValueError("cg_tol must lie in (0, 1)")
        if self.cg_max_iters < 1:
            raise ValueError("cg_max_iters must be >= 1")
        if self.vorticity_eps < 0:
            raise ValueError("vorticity_eps must be >= 0")


@dataclass
class SimState:
    vel: MacField
    density: ScalarField
    temperature: ScalarField
    pressure: np.ndarray | None = None
    frame: int = 0

    @classmethod
    def zeros(cls, grid):
        return cls(
            MacField.zeros(grid), ScalarField.zeros(grid), ScalarField.zeros(grid)
        )


# ---------------------------------------------------------------------------
# sampling


def _bilinear(f, col, row, with_extrema=False):
    """Clamped bilinear interpolation of array ``f`` at fractional indices."""
    nr, nc = f.shape
    col = np.clip(col, 0.0, nc - 1.0)
    row = np.clip(row, 0.0, nr - 1.0)
    i0 = np.minimum(col.astype(np.int64), nc - 2)
    j0 = np.minimum(row.astype(np.int64), nr - 2)
    tx = col - i0
    ty = row - j0
    f00 = f[j0, i0]
    f10 = f[j0, i0 + 1]
    f01 = f[j0 + 1, i0]
    f11 = f[j0 + 1, i0 + 1]
    val = (
        f00 * (1 - tx) * (1 - ty)
        + f10 * tx * (1 - ty)
        + f01 * (1 - tx) * ty
        + f11 * tx * ty
    )
    if not with_extrema:
        return val
    lo = np.minimum(np.minimum(f00, f10), np.minimum(f01, f11))
    hi = np.maximum(np.maximum(f00, f10), np.maximum(f01, f11))
    return val, lo, hi


def sample_velocity(vel, x, y):
    """Velocity components at world positions (x, y)."""
    h = vel.grid.h
    u = _bilinear(vel.u, x / h, y / h - 0.5)
    v = _bilinear(vel.v, x / h - 0.5, y / h)
    return u, v


def _component_positions(grid, which):
    h = grid.h
    nx, ny = grid.nx, grid.ny
    if which == "u":
        j, i = np.meshgrid(np.arange(ny), np.arange(nx + 1), indexing="ij")
        return i * h, (j + 0.5) * h
    if which == "v":
        j, i = np.meshgrid(np.arange(ny + 1), np.arange(nx), indexing="ij")
        return (i + 0.5) * h, j * h
    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    return (i + 0.5) * h, (j + 0.5) * h


def _sampler(grid, which):
    h = grid.h
    if which == "u":
        return lambda f, x, y, ex=False: _bilinear(f, x / h, y / h - 0.5, ex)
    if which == "v":
        return lambda f, x, y, ex=False: _bilinear(f, x / h - 0.5, y / h, ex)
    return lambda f, x, y, ex=False: _bilinear(f, x / h - 0.5, y / h - 0.5, ex)


def _advect_array(vel, q, grid, which, dt, maccormack=True):
    """MacCormack (or plain semi-Lagrangian) transport of one component array."""
    X, Y = _component_positions(grid, which)
    sample = _sampler(grid, which)
    up, vp = sample_velocity(vel, X, Y)
    xb = X - dt * up
    yb = Y - dt * vp
    q_hat, lo, hi = sample(q, xb, yb, True)
    if not maccormack:
        return q_hat
    # trace the predictor forward and fold half the round-trip error back in
    xf = X + dt * up
    yf = Y + dt * vp
    q_back = sample(q_hat, xf, yf)
    q_new = q_hat + 0.5 * (q - q_back)
    return np.clip(q_new, lo, hi)


def advect_maccormack(vel, q, dt):
    """Advect a ScalarField or MacField through ``vel`` for one step.

    The corrector is clamped to the extrema of the samples used by the
    backward trace, so values never overshoot local input bounds.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    g = vel.grid
    if isinstance(q, ScalarField):
        return ScalarField(g, _advect_array(vel, q.values, g, "c", dt))
    u = _advect_array(vel, q.u, g, "u", dt)
    v = _advect_array(vel, q.v, g, "v", dt)
    return MacField(g, u, v)


def advect_semi_lagrangian(vel, q, dt):
    """First-order transport; used for visualization-only density."""
    g = vel.grid
    if isinstance(q, ScalarField):
        return ScalarField(g, _advect_array(vel, q.values, g, "c", dt, False))
    u = _advect_array(vel, q.u, g, "u", dt, False)
    v = _advect_array(vel, q.v, g, "v", dt, False)
    return MacField(g, u, v)


# ---------------------------------------------------------------------------
# body forces


def add_body_forces(vel, density, temperature, params, dt):
    """Buoyancy: v faces pick up dt * (-alpha * rho + beta * T).

    The cell-centered combination is averaged onto horizontal faces, so
    a unit source in one cell splits evenly across its two faces. Linear
    in (density, temperature) by construction.
    """
    g = vel.grid
    buoy = -params.buoyancy_alpha * density.values + params.buoyancy_beta * temperature.values
    fv = np.zeros((g.ny + 1, g.nx))
    fv[1:-1, :] = 0.5 * (buoy[:-1, :] + buoy[1:, :])
    fv[0, :] = buoy[0, :]
    fv[-1, :] = buoy[-1, :]
    return MacField(g, vel.u.copy(), vel.v + dt * fv)


def vorticity_confinement(vel, eps, dt):
    """Confinement force eps * h * (N x omega) added to faces.

    omega is the scalar curl at cell centers and N the normalized
    gradient of |omega|; irrotational fields are untouched.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if eps == 0.0:
        return vel.copy()
    g = vel.grid
    h = g.h
    uc = 0.5 * (vel.u[:, :-1] + vel.u[:, 1:])
    vc = 0.5 * (vel.v[:-1, :] + vel.v[1:, :])
    omega = np.gradient(vc, h, axis=1) - np.gradient(uc, h, axis=0)
    mag = np.abs(omega)
    gy, gx = np.gradient(mag, h)
    norm = np.sqrt(gx * gx + gy * gy) + 1e-20
    nx_ = gx / norm
    ny_ = gy / norm
    fx = eps * h * (ny_ * omega)
    fy = eps * h * (-nx_ * omega)
    u = vel.u.copy()
    v = vel.v.copy()
    u[:, 1:-1] += dt * 0.5 * (fx[:, :-1] + fx[:, 1:])
    v[1:-1, :] += dt * 0.5 * (fy[:-1, :] + fy[1:, :])
    return MacField(g, u, v)


# ---------------------------------------------------------------------------
# pressure projection


def _face_coefficients(grid):
    """Connection coefficients for the Poisson stencil.

    Zero across walls and solid cells; the top row is a Dirichlet
    (ghost pressure 0) connection when the boundary is open.
    """
    nx, ny = grid.nx, grid.ny
    solid = grid.solids()
    fluid = ~solid
    cx = np.zeros((ny, nx + 1))
    cy = np.zeros((ny + 1, nx))
    cx[:, 1:-1] = (fluid[:, :-1] & fluid[:, 1:]).astype(np.float64)
    cy[1:-1, :] = (fluid[:-1, :] & fluid[1:, :]).astype(np.float64)
    if grid.boundary == "open":
        cy[-1, :] = fluid[-1, :].astype(np.float64)
    return cx, cy, fluid


def _apply_poisson(p, cx, cy, h2):
    """Negative discrete Laplacian with the masked stencil (SPD)."""
    out = np.zeros_like(p)
    fe = cx[:, 1:-1] * (p[:, 1:] - p[:, :-1])
    out[:, :-1] += fe
    out[:, 1:] -= fe
    fn = cy[1:-1, :] * (p[1:, :] - p[:-1, :])
    out[:-1, :] += fn
    out[1:, :] -= fn
    out[-1, :] -= cy[-1, :] * p[-1, :]
    return -out / h2


def _project(vel, grid, cg_tol, cg_max_iters, p0=None):
    cx, cy, fluid = _face_coefficients(grid)
    h = grid.h
    h2 = h * h
    nfluid = int(fluid.sum())
    b = -divergence(vel).values
    b[~fluid] = 0.0
    if grid.boundary == "closed":
        b[fluid] -= b[fluid].sum() / nfluid
    bnorm = np.abs(b).max()
    p = np.zeros_like(b) if p0 is None else p0.copy()
    p[~fluid] = 0.0
    if bnorm == 0.0:
        return vel.copy(), p, 0.0, 0

    tol_abs = cg_tol * bnorm
    r = b - _apply_poisson(p, cx, cy, h2)
    iters = 0
    if np.abs(r).max() > tol_abs:
        d = r.copy()
        rs = float(np.vdot(r, r).real)
        for iters in range(1, cg_max_iters + 1):
            Ad = _apply_poisson(d, cx, cy, h2)
            dAd = float(np.vdot(d, Ad).real)
            if dAd <= 0.0:
                break
            alpha = rs / dAd
            p += alpha * d
            r -= alpha * Ad
            if np.abs(r).max() <= tol_abs:
                break
            rs_new = float(np.vdot(r, r).real)
            d = r + (rs_new / rs) * d
            rs = rs_new
        else:
            raise ConvergenceError(
                f"pressure solve stalled at residual {np.abs(r).max():.3e} "
                f"(target {tol_abs:.3e}) after {cg_max_iters} iterations",
                residual=float(np.abs(r).max()),
                iterations=cg_max_iters,
            )
        if np.abs(r).max() > tol_abs:
            raise ConvergenceError(
                f"pressure solve stalled at residual {np.abs(r).max():.3e} "
                f"(target {tol_abs:.3e}) after {iters} iterations",
                residual=float(np.abs(r).max()),
                iterations=iters,
            )

    u = vel.u.copy()
    v = vel.v.copy()
    u[:, 1:-1] -= cx[:, 1:-1] * (p[:, 1:] - p[:, :-1]) / h
    v[1:-1, :] -= cy[1:-1, :] * (p[1:, :] - p[:-1, :]) / h
    v[-1, :] += cy[-1, :] * p[-1, :] / h
    return MacField(grid, u, v), p, float(np.abs(r).max()), iters


def project_pressure(vel, grid, cg_tol=1e-6, cg_max_iters=1000):
    """Remove the divergent part of ``vel``.

    The returned field satisfies ``max |div| <= cg_tol * max |div_in|``
    exactly, because the CG residual *is* the post-projection divergence
    for this discretization. Raises ConvergenceError (with the final
    residual) if the iteration budget runs out.
    """
    masked = apply_solid_mask(vel)
    out, _, _, _ = _project(masked, grid, cg_tol, cg_max_iters)
    return apply_solid_mask(out)


# ---------------------------------------------------------------------------
# stepping


def _emit(state, params, dt):
    src = params.source
    if src is None:
        return state.density, state.temperature
    g = state.density.grid
    x, y = _component_positions(g, "c")
    mask = (x - src.cx) ** 2 + (y - src.cy) ** 2 <= src.radius**2
    d = state.density.values.copy()
    t = state.temperature.values.copy()
    d[mask] += src.density_rate * dt
    t[mask] += src.temperature_rate * dt
    return ScalarField(g, d), ScalarField(g, t)


def step(state, params):
    """Advance one frame: sources, advection, forces, confinement, projection."""
    g = state.vel.grid
    dt = params.dt
    vel = apply_solid_mask(state.vel)

    density, temperature = _emit(state, params, dt)
    new_vel = apply_solid_mask(advect_maccormack(vel, vel, dt))
    density = advect_maccormack(vel, density, dt)
    temperature = advect_maccormack(vel, temperature, dt)
    new_vel = add_body_forces(new_vel, density, temperature, params, dt)
    new_vel = vorticity_confinement(new_vel, params.vorticity_eps, dt)
    new_vel = apply_solid_mask(new_vel)
    new_vel, pressure, _, _ = _project(
        new_vel, g, params.cg_tol, params.cg_max_iters, state.pressure
    )
    new_vel = apply_solid_mask(new_vel)
    return SimState(new_vel, density, temperature, pressure, state.frame + 1)


# ---------------------------------------------------------------------------
# scenes and datasets


@dataclass
class SceneConfig:
    """Declarative description of a training scene.

    ``kind`` is ``"plume"`` (disk emitter with buoyancy) or
    ``"buoyant_region"`` (an initial velocity seeded upward inside a
    union of disks and downward elsewhere, then left to evolve freely).
    ``frames`` counts recorded snapshots; ``warmup`` steps run first and
    are discarded.
    """

    kind: str = "plume"
    nx: int = 64
    ny: int = 128
    h: float = 1.0 / 64
    boundary: str = "open"
    dt: float = 0.05
    frames: int = 120
    warmup: int = 0
    buoyancy_alpha: float = 0.05
    buoyancy_beta: float = 0.3
    vorticity_eps: float = 1.5
    cg_tol: float = 1e-6
    cg_max_iters: int = 1000
    emit_cx: float = 0.5
    emit_cy: float = 0.12
    emit_radius: float = 0.08
    emit_density: float = 2.0
    emit_temperature: float = 2.0
    region_disks: tuple = ((0.35, 0.45, 0.13), (0.62, 0.52, 0.11), (0.5, 0.3, 0.09))
    region_up: float = 0.3
    region_down: float | None = None
    record_density: bool = True

    def grid(self):
        return GridSpec(self.nx, self.ny, self.h, self.boundary)

    def params(self):
        src = None
        if self.kind == "plume":
            src = Emitter(
                self.emit_cx * self.nx * self.h,
                self.emit_cy * self.ny * self.h,
                self.emit_radius * self.nx * self.h,
                self.emit_density,
                self.emit_temperature,
            )
        return SimParams(
            dt=self.dt,
            buoyancy_alpha=self.buoyancy_alpha if self.kind == "plume" else 0.0,
            buoyancy_beta=self.buoyancy_beta if self.kind == "plume" else 0.0,
            vorticity_eps=self.vorticity_eps if self.kind == "plume" else 0.0,
            cg_tol=self.cg_tol,
            cg_max_iters=self.cg_max_iters,
            source=src,
        )


def _region_mask(scene, grid):
    x, y = _component_positions(grid, "c")
    w = scene.nx * scene.h
    hgt = scene.ny * scene.h
    mask = np.zeros((grid.ny, grid.nx), dtype=bool)
    disks = scene.region_disks
    flat = []
    for d in disks:
        flat.extend(d if isinstance(d, (tuple, list)) else [d])
    for k in range(0, len(flat), 3):
        cx, cy, r = flat[k] * w, flat[k + 1] * hgt, flat[k + 2] * min(w, hgt)
        mask |= (x - cx) ** 2 + (y - cy) ** 2 <= r**2
    return mask


def initial_state(scene):
    """Starting SimState for a scene."""
    grid = scene.grid()
    state = SimState.zeros(grid)
    if scene.kind == "buoyant_region":
        mask = _region_mask(scene, grid)
        up = scene.region_up
        down = scene.region_down
        if down is None:
            n_in = int(mask.sum())
            n_out = mask.size - n_in
            down = -up * n_in / max(n_out, 1)
        centered = np.where(mask, up, down)
        v = np.zeros((grid.ny + 1, grid.nx))
        v[1:-1, :] = 0.5 * (centered[:-1, :] + centered[1:, :])
        state.vel = apply_solid_mask(MacField(grid, state.vel.u, v))
        state.density = ScalarField(grid, mask.astype(np.float64))
    elif scene.kind != "plume":
        raise ValueError(f"unknown scene kind {scene.kind!r}")
    return state


def generate_dataset(scene):
    """Run a scene and collect flattened velocity snapshots.

    Returns ``(snapshots, density_frames)`` where ``snapshots`` is a
    :class:`flowdmd.dmd.SnapshotMatrix` with one column per recorded
    frame at uniform dt, and ``density_frames`` has shape
    (ny, nx, frames) or is None when the scene disables recording.
    """
    from .dmd import SnapshotMatrix

    if scene.frames < 2:
        raise ValueError("a dataset needs at least 2 frames")
    grid = scene.grid()
    params = scene.params()
    state = initial_state(scene)
    # seed the buoyant_region velocity through one projection so frame 0
    # obeys the same divergence bound as every later frame
    if scene.kind == "buoyant_region":
        vel, pressure, _, _ = _project(state.vel, grid, scene.cg_tol, scene.cg_max_iters)
        state.vel = apply_solid_mask(vel)
        state.pressure = pressure
    for _ in range(scene.warmup):
        state = step(state, params)

    cols = np.empty((grid.n_state, scene.frames))
    dens = (
        np.empty((grid.ny, grid.nx, scene.frames)) if scene.record_density else None
    )
    cols[:, 0] = flatten(state.vel)
    if dens is not None:
        dens[:, :, 0] = state.density.values
    for k in range(1, scene.frames):
        state = step(state, params)
        cols[:, k] = flatten(state.vel)
        if dens is not None:
            dens[:, :, k] = state.density.values
    meta = {"scene": scene, "solver": "maccormack_cg"}
    return SnapshotMatrix(cols, scene.dt, grid, meta), dens
