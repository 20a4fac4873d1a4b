"""Low-resolution-guided upscaling.

Two cooperating mechanisms: split-mode evolution keeps the bulk flow of
a low-res guide in the low-order modes while the model's dynamics fill
in high-order detail, and an equality-constrained projection snaps the
decoded field onto the affine space of states whose downsample equals
the guide exactly. Both are linear, and the projection's KKT system is
factorized once so a per-frame correction costs one sparse multiply and
a triangular solve.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import GridSpec, build_downsample, coarse_grid
from .runtime import ReducedState, decode, encode


def build_inject(high, factor):
    """Nearest-face piecewise-constant prolongation (n_high x n_low).

    Each fine face takes the value of the nearest coarse face of its
    component. Constants map to constants, and downsampling an injected
    field returns the original coarse field exactly.
    """
    low = coarse_grid(high, factor)
    f = factor
    rows, cols = [], []

    jh, ih = np.meshgrid(np.arange(high.ny), np.arange(high.nx + 1), indexing="ij")
    il = np.minimum((ih + f // 2) // f, low.nx)
    jl = jh // f
    rows.append((jh * (high.nx + 1) + ih).ravel())
    cols.append((jl * (low.nx + 1) + il).ravel())

    jh, ih = np.meshgrid(np.arange(high.ny + 1), np.arange(high.nx), indexing="ij")
    jl = np.minimum((jh + f // 2) // f, low.ny)
    il = ih // f
    rows.append((high.n_u + jh * high.nx + ih).ravel())
    cols.append((low.n_u + jl * low.nx + il).ravel())

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.ones(rows.size)
    return sp.csr_matrix((vals, (rows, cols)), shape=(high.n_state, low.n_state))


@dataclass
class UpresConfig:
    """Split index, downsample factor, and per-mode blend weights.

    The first ``split`` modes (frequency order) follow the guide; the
    rest evolve under the model. ``blend`` mixes projected (1) against
    direct (0) per mode and defaults to 1 for the low-order block and 0
    above it.
    """

    split: int
    factor: int
    blend: np.ndarray | None = None
    _inject_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.split < 0:
            raise ValueError("split must be >= 0")
        if self.factor < 2:
            raise ValueError("factor must be >= 2")
        if self.blend is not None:
            self.blend = np.asarray(self.blend, dtype=np.float64).ravel()
            if ((self.blend < 0) | (self.blend > 1)).any():
                raise ValueError("blend weights must lie in [0, 1]")

    def effective_split(self, model):
        """The split index rounded down so it never divides a conjugate pair."""
        s = self.split
        if s > model.r:
            raise ValueError(f"split {s} exceeds model rank {model.r}")
        if 0 < s < model.r and model.pair_partner[s - 1] == s:
            s -= 1
        return s

    def blend_for(self, model):
        if self.blend is not None:
            if self.blend.size != model.r:
                raise ValueError(
                    f"blend has {self.blend.size} entries, model rank is {model.r}"
                )
            return self.blend
        s = self.effective_split(model)
        out = np.zeros(model.r)
        out[:s] = 1.0
        return out

    def injector(self, grid):
        key = (grid.nx, grid.ny, self.factor)
        if key not in self._inject_cache:
            self._inject_cache[key] = build_inject(grid, self.factor)
        return self._inject_cache[key]


def upres_step(model, R_prev, L_t, cfg):
    """One guided step: evolve, then overwrite the low-order modes with
    the encoded guide.

    Returns the new reduced state and its decoded high-res field. Linear
    in (R_prev, L_t) jointly.
    """
    grid = model.grid_meta
    if not isinstance(grid, GridSpec):
        raise ValueError("guided upscaling needs grid metadata on the model")
    low = coarse_grid(grid, cfg.factor)
    L_t = np.asarray(L_t).ravel()
    if L_t.size != low.n_state:
        raise ValueError(
            f"low-res state has {L_t.size} entries, expected {low.n_state} "
            f"for {low.nx}x{low.ny}"
        )
    s = cfg.effective_split(model)
    R_star = model.lam * R_prev.z
    P = encode(model, cfg.injector(grid) @ L_t).z
    z = np.concatenate([P[:s], R_star[s:]])
    state = ReducedState(z, R_prev.frame + 1)
    return state, decode(model, state)


@dataclass
class Projector:
    """Precomputed pieces of the guide-consistency projection."""

    downsample: sp.csr_matrix
    gram_solve: object
    high: GridSpec
    factor: int


def build_projector(high, factor):
    """Factor the Gram matrix of the downsample operator once.

    Raises if the Gram matrix is numerically rank deficient (the
    downsample would not have full row rank).
    """
    A = build_downsample(high, factor)
    gram = (A @ A.T).tocsc()
    lu = spla.splu(gram)
    diag = np.abs(lu.U.diagonal())
    if diag.min() <= 1e-12 * max(diag.max(), 1e-300):
        raise ValueError("downsample Gram matrix is numerically rank deficient")
    return Projector(A, lu, high, factor)


def constrained_project(proj, H_t, L_t):
    """Minimum-distance correction onto the space with A x = L_t.

    Closed form through the Schur complement of the KKT system with an
    identity Hessian: x = H + A^T (A A^T)^{-1} (L - A H).
    """
    H_t = np.asarray(H_t).ravel()
    L_t = np.asarray(L_t).ravel()
    A = proj.downsample
    if H_t.size != A.shape[1] or L_t.size != A.shape[0]:
        raise ValueError(
            f"projection shapes mismatch: H has {H_t.size}, L has {L_t.size}, "
            f"operator is {A.shape[0]}x{A.shape[1]}"
        )
    gap = L_t - A @ H_t
    return H_t + A.T @ proj.gram_solve.solve(gap)


def blend_fields(x_projected, H_direct, model, cfg):
    """Per-mode convex mix of the projected and direct fields."""
    w = cfg.blend_for(model)
    zp = encode(model, x_projected).z
    zd = encode(model, H_direct).z
    return decode(model, w * zp + (1.0 - w) * zd)


def guided_rollout(model, H0, low_frames, cfg, project=True):
    """Drive a model with a sequence of low-res frames.

    ``low_frames`` has one column per guide frame; column 0 matches the
    high-res initial condition ``H0`` in time. Output column t is the
    upscaled field for guide frame t (t >= 1). With ``project`` each
    decoded field is snapped onto the guide-consistent space; the
    correction lives partly outside the mode span, so a per-mode blend
    (which round-trips through the basis) is applied only when
    ``cfg.blend`` is set explicitly. Without ``project`` the raw
    split-evolution field is returned.
    """
    grid = model.grid_meta
    low_frames = np.asarray(low_frames)
    frames = low_frames.shape[1]
    if frames < 2:
        raise ValueError("guided rollout needs at least 2 guide frames")
    proj = build_projector(grid, cfg.factor) if project else None
    R = encode(model, np.asarray(H0).ravel())
    out = np.empty((model.n, frames - 1))
    for t in range(1, frames):
        R, H = upres_step(model, R, low_frames[:, t], cfg)
        if proj is not None:
            x = constrained_project(proj, H, low_frames[:, t])
            H = blend_fields(x, H, model, cfg) if cfg.blend is not None else x
        out[:, t - 1] = H
    return out
