"""Staggered (MAC) grid fields and the operators built on top of them.

Velocity components live on cell faces: ``u`` on vertical faces with
shape ``(ny, nx + 1)``, ``v`` on horizontal faces with shape
``(ny + 1, nx)``. Scalars live at cell centers with shape ``(ny, nx)``.
Row index ``j`` walks the y axis, column index ``i`` walks the x axis,
and a face or center at index ``(j, i)`` sits at

    u[j, i] -> (i * h, (j + 0.5) * h)
    v[j, i] -> ((i + 0.5) * h, j * h)
    c[j, i] -> ((i + 0.5) * h, (j + 0.5) * h)

The flattened state vector is the u block in row-major order followed
by the v block in row-major order. This layout is part of the on-disk
format (see docs/formats.md) and must not change.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

BOUNDARY_KINDS = ("closed", "open")


@dataclass(eq=False)
class GridSpec:
    """Uniform 2D staggered grid: cell counts, cell width, boundary kind.

    ``boundary`` is ``"closed"`` (free-slip box) or ``"open"``
    (zero-pressure top, otherwise closed walls). ``solid_mask`` marks
    obstacle cells, shape ``(ny, nx)``; ``None`` means no obstacles.
    """

    nx: int
    ny: int
    h: float
    boundary: str = "closed"
    solid_mask: np.ndarray | None = None

    def __post_init__(self):
        if self.boundary == "closed-box":  # accepted alias
            self.boundary = "closed"
        if self.nx < 2 or self.ny < 2:
            raise ValueError(f"grid must be at least 2x2, got {self.nx}x{self.ny}")
        if not self.h > 0:
            raise ValueError(f"cell width must be positive, got {self.h}")
        if self.boundary not in BOUNDARY_KINDS:
            raise ValueError(f"unknown boundary kind {self.boundary!r}")
        if self.solid_mask is not None:
            mask = np.asarray(self.solid_mask, dtype=bool)
            if mask.size != self.nx * self.ny:
                raise ValueError(
                    f"solid_mask needs {self.nx * self.ny} entries, got {mask.size}"
                )
            self.solid_mask = mask.reshape(self.ny, self.nx)

    @property
    def n_cells(self):
        return self.nx * self.ny

    @property
    def n_u(self):
        return (self.nx + 1) * self.ny

    @property
    def n_v(self):
        return self.nx * (self.ny + 1)

    @property
    def n_state(self):
        """Length of the flattened velocity state vector."""
        return self.n_u + self.n_v

    def solids(self):
        """Obstacle mask as a dense (ny, nx) boolean array."""
        if self.solid_mask is None:
            return np.zeros((self.ny, self.nx), dtype=bool)
        return self.solid_mask

    def __eq__(self, other):
        if not isinstance(other, GridSpec):
            return NotImplemented
        return (
            self.nx == other.nx
            and self.ny == other.ny
            and self.h == other.h
            and self.boundary == other.boundary
            and np.array_equal(self.solids(), other.solids())
        )


@dataclass(eq=False)
class MacField:
    """Staggered velocity field on a :class:`GridSpec`."""

    grid: GridSpec
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.ascontiguousarray(self.u, dtype=np.float64)
        self.v = np.ascontiguousarray(self.v, dtype=np.float64)
        g = self.grid
        if self.u.shape != (g.ny, g.nx + 1):
            raise ValueError(f"u has shape {self.u.shape}, want {(g.ny, g.nx + 1)}")
        if self.v.shape != (g.ny + 1, g.nx):
            raise ValueError(f"v has shape {self.v.shape}, want {(g.ny + 1, g.nx)}")
        if not (np.isfinite(self.u).all() and np.isfinite(self.v).all()):
            raise ValueError("velocity field contains non-finite entries")

    def copy(self):
        return MacField(self.grid, self.u.copy(), self.v.copy())

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((grid.ny, grid.nx + 1)), np.zeros((grid.ny + 1, grid.nx)))


@dataclass(eq=False)
class ScalarField:
    """Cell-centered scalar (smoke density, temperature, divergence...)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        g = self.grid
        if self.values.shape != (g.ny, g.nx):
            raise ValueError(f"values have shape {self.values.shape}, want {(g.ny, g.nx)}")
        if not np.isfinite(self.values).all():
            raise ValueError("scalar field contains non-finite entries")

    def copy(self):
        return ScalarField(self.grid, self.values.copy())

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((grid.ny, grid.nx)))


def flatten(fld):
    """Flatten a MacField into the canonical state vector.

    Layout: u entries row-major, then v entries row-major.
    """
    return np.concatenate([fld.u.ravel(), fld.v.ravel()])


def unflatten(vec, grid):
    """Inverse of :func:`flatten`. Raises on length mismatch."""
    vec = np.asarray(vec, dtype=np.float64).ravel()
    if vec.size != grid.n_state:
        raise ValueError(
            f"state vector has {vec.size} entries, grid wants {grid.n_state}"
        )
    u = vec[: grid.n_u].reshape(grid.ny, grid.nx + 1)
    v = vec[grid.n_u :].reshape(grid.ny + 1, grid.nx)
    return MacField(grid, u.copy(), v.copy())


def divergence(fld):
    """Per-cell discrete divergence (u_right - u_left + v_top - v_bottom) / h."""
    g = fld.grid
    d = (fld.u[:, 1:] - fld.u[:, :-1] + fld.v[1:, :] - fld.v[:-1, :]) / g.h
    return ScalarField(g, d)


def build_divergence(grid):
    """Sparse matrix form of :func:`divergence` acting on flat state vectors.

    Shape (nx*ny, n_state); used as the linear constraint when checking
    that reconstructed fields stay divergence-free.
    """
    nx, ny, h = grid.nx, grid.ny, grid.h
    n_u = grid.n_u
    cell = np.arange(ny * nx).reshape(ny, nx)
    jj, ii = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")

    def u_index(j, i):
        return j * (nx + 1) + i

    def v_index(j, i):
        return n_u + j * nx + i

    rows = np.tile(cell.ravel(), 4)
    cols = np.concatenate(
        [
            u_index(jj, ii + 1).ravel(),
            u_index(jj, ii).ravel(),
            v_index(jj + 1, ii).ravel(),
            v_index(jj, ii).ravel(),
        ]
    )
    vals = np.concatenate(
        [
            np.full(ny * nx, 1.0 / h),
            np.full(ny * nx, -1.0 / h),
            np.full(ny * nx, 1.0 / h),
            np.full(ny * nx, -1.0 / h),
        ]
    )
    return sp.csr_matrix((vals, (rows, cols)), shape=(ny * nx, grid.n_state))


def coarse_grid(high, factor):
    """The GridSpec obtained by merging ``factor`` x ``factor`` cells."""
    if factor < 2:
        raise ValueError(f"downsample factor must be >= 2, got {factor}")
    if high.nx % factor or high.ny % factor:
        raise ValueError(
            f"grid {high.nx}x{high.ny} not divisible by factor {factor}"
        )
    return GridSpec(high.nx // factor, high.ny // factor, high.h * factor, high.boundary)


def build_downsample(high, factor):
    """Face-averaging restriction from a fine grid to a ``factor``-times
    coarser one.

    Each low-res u face aligns with a fine vertical face column and
    averages the ``factor`` fine faces it spans; v faces likewise along
    rows. Every row of the returned matrix sums to 1, so constants are
    preserved exactly.
    """
    low = coarse_grid(high, factor)
    f = factor
    nxh = high.nx
    nxl, nyl = low.nx, low.ny

    rows, cols, vals = [], [], []

    # u faces: low face (jl, il) covers fine faces (jl*f + t, il*f), t in [0, f)
    jl, il = np.meshgrid(np.arange(nyl), np.arange(nxl + 1), indexing="ij")
    low_idx = (jl * (nxl + 1) + il).ravel()
    for t in range(f):
        hi_idx = ((jl * f + t) * (nxh + 1) + il * f).ravel()
        rows.append(low_idx)
        cols.append(hi_idx)
        vals.append(np.full(low_idx.size, 1.0 / f))

    # v faces: low face (jl, il) covers fine faces (jl*f, il*f + t)
    jl, il = np.meshgrid(np.arange(nyl + 1), np.arange(nxl), indexing="ij")
    low_idx = (low.n_u + jl * nxl + il).ravel()
    for t in range(f):
        hi_idx = (high.n_u + (jl * f) * nxh + il * f + t).ravel()
        rows.append(low_idx)
        cols.append(hi_idx)
        vals.append(np.full(low_idx.size, 1.0 / f))

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.csr_matrix((vals, (rows, cols)), shape=(low.n_state, high.n_state))


def face_masks(grid):
    """Boolean masks of faces whose normal velocity is pinned to zero.

    Wall faces of a closed box plus any face adjoining a solid cell.
    The top v faces stay free when the boundary is open.
    """
    nx, ny = grid.nx, grid.ny
    solid = grid.solids()
    u_block = np.zeros((ny, nx + 1), dtype=bool)
    v_block = np.zeros((ny + 1, nx), dtype=bool)
    u_block[:, 0] = True
    u_block[:, -1] = True
    v_block[0, :] = True
    if grid.boundary == "closed":
        v_block[-1, :] = True
    u_block[:, 1:] |= solid
    u_block[:, :-1] |= solid
    v_block[1:, :] |= solid
    v_block[:-1, :] |= solid
    return u_block, v_block


def apply_solid_mask(fld):
    """Zero out normal velocities on wall and obstacle faces (new field)."""
    ub, vb = face_masks(fld.grid)
    u = fld.u.copy()
    v = fld.v.copy()
    u[ub] = 0.0
    v[vb] = 0.0
    return MacField(fld.grid, u, v)
