"""Reduced-space simulation on a trained model.

All operations act on length-r coefficient vectors; the eigenvalues are
applied elementwise, so a step is O(r), a k-step jump is a single
elementwise power, and evaluation at arbitrary real times goes through
the principal logarithm of the spectrum. Decoding back to the grid is
one matrix-vector product.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import EigenvalueFloorError, RolloutOverflowError
from .grid import GridSpec, unflatten

INVERSE_FLOOR = 1e-8
_EXP_OVERFLOW = 700.0  # log(DBL_MAX) with headroom


class ImaginaryResidueWarning(RuntimeWarning):
    """Decoded field had a non-negligible imaginary part.

    Signals broken conjugate-pair bookkeeping (e.g. hand-built
    coefficients); the real part is still returned.
    """


@dataclass
class ReducedState:
    """Coefficients in the mode basis plus a signed frame index."""

    z: np.ndarray
    frame: int = 0

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=np.complex128).ravel()
        if not np.isfinite(self.z.view(np.float64)).all():
            raise ValueError("reduced state contains non-finite entries")


def _as_state(z, frame=0):
    return z if isinstance(z, ReducedState) else ReducedState(z, frame)


def encode(model, u, frame=0):
    """Project a full-space state onto the mode basis: z = pinv(phi) @ u."""
    u = np.asarray(u).ravel()
    if u.size != model.n:
        raise ValueError(f"state has {u.size} entries, model wants {model.n}")
    return ReducedState(model.phi_pinv() @ u, frame)


def _conjugate_symmetry_defect(model, z):
    defect = 0.0
    for a in range(model.r):
        b = model.pair_partner[a]
        if b == a:
            defect = max(defect, abs(z[a].imag))
        elif b > a:
            defect = max(defect, abs(z[b] - np.conj(z[a])))
    return defect


def decode(model, z):
    """Reconstruct a full-space state: Re(phi @ z).

    When the coefficients are conjugate-symmetric (the invariant every
    path in this module preserves) the product is taken in real
    arithmetic through the model's pair-aware decode table. Otherwise
    the complex product is formed and a warning is raised if the
    discarded imaginary part is significant.
    """
    if isinstance(z, ReducedState):
        z = z.z
    z = np.asarray(z, dtype=np.complex128).ravel()
    if z.size != model.r:
        raise ValueError(f"reduced state has {z.size} entries, model rank is {model.r}")
    scale = max(float(np.abs(z).max()) if z.size else 0.0, 1e-300)
    if _conjugate_symmetry_defect(model, z) <= 1e-9 * scale:
        cols, re_idx, im_idx = model.decode_table()
        coeff = np.empty(cols.shape[1])
        for k, a in re_idx:
            coeff[k] = z[a].real
        for k, a in im_idx:
            coeff[k] = z[a].imag
        return cols @ coeff
    y = model.phi @ z
    ynorm = np.linalg.norm(y)
    if ynorm > 0 and np.linalg.norm(y.imag) > 1e-6 * ynorm:
        warnings.warn(
            "decoded field has relative imaginary residue "
            f"{np.linalg.norm(y.imag) / ynorm:.2e}; conjugate-pair "
            "bookkeeping looks broken",
            ImaginaryResidueWarning,
            stacklevel=2,
        )
    return y.real


def step(model, zstate):
    """One forward step: multiply each coefficient by its eigenvalue."""
    s = _as_state(zstate)
    return ReducedState(model.lam * s.z, s.frame + 1)


def step_k(model, zstate, k):
    """Jump k frames ahead in one elementwise power."""
    if k < 0:
        raise ValueError("k must be >= 0; use inverse_step to go backward")
    s = _as_state(zstate)
    if k == 0:
        return ReducedState(s.z.copy(), s.frame)
    mods = np.abs(model.lam)
    grow = mods > 1.0
    if grow.any():
        logmag = k * np.log(mods[grow])
        if logmag.max() > _EXP_OVERFLOW:
            i = int(np.flatnonzero(grow)[np.argmax(logmag)])
            raise RolloutOverflowError(
                f"|lambda_{i}|^k = {mods[i]:.6f}^{k} overflows"
            )
    return ReducedState(model.lam**k * s.z, s.frame + k)


def eval_continuous(model, z0, t):
    """Evaluate at an arbitrary time offset t (seconds) from the state.

    Uses exp(Omega t) with Omega the principal log of the spectrum over
    dt; agrees with step_k at integer multiples of dt.
    """
    s = _as_state(z0)
    zero = np.flatnonzero(model.lam == 0)
    if zero.size:
        raise ValueError(
            f"modes {zero.tolist()} have zero eigenvalue; no continuous log exists"
        )
    omega = np.log(model.lam) / model.dt
    if t != 0.0 and (omega.real * t).max() > _EXP_OVERFLOW:
        raise RolloutOverflowError(f"exp(Re(Omega) * {t}) overflows")
    return ReducedState(np.exp(omega * t) * s.z, s.frame)


def inverse_step(model, zstate, floor=INVERSE_FLOOR):
    """One backward step: divide by the eigenvalues.

    Modes with |lambda| below ``floor`` are strongly dissipative forward
    and explosive backward, so they block reversal with an error listing
    their indices; drop them (weight 0 edit) and retry if needed.
    """
    s = _as_state(zstate)
    mods = np.abs(model.lam)
    bad = np.flatnonzero(mods < floor)
    if bad.size:
        raise EigenvalueFloorError(
            f"inverse stepping blocked: modes {bad.tolist()} have |lambda| "
            f"below {floor:g}",
            bad,
        )
    return ReducedState(s.z / model.lam, s.frame - 1)


def step_forced(model, ctrl, zstate, q=None, f=None, dt=None):
    """Forward step with control channels and free-form forces.

    z' = lam * z + sum_i reduced_b_i @ q_i * dt + pinv(phi) @ sum_j f_j * dt
    """
    s = _as_state(zstate)
    if dt is None:
        dt = model.dt
    if dt <= 0:
        raise ValueError("dt must be positive")
    z = model.lam * s.z
    if q is not None:
        if ctrl is None:
            raise ValueError("channel inputs given without a ControlOperator")
        if len(q) != len(ctrl.reduced_b):
            raise ValueError(
                f"{len(q)} channel inputs for {len(ctrl.reduced_b)} channels"
            )
        for mat, qi in zip(ctrl.reduced_b, q):
            qi = np.asarray(qi).ravel()
            if qi.size != mat.shape[1]:
                raise ValueError(
                    f"channel input has {qi.size} entries, channel wants {mat.shape[1]}"
                )
            z = z + (mat @ qi) * dt
    if f is not None:
        fs = [f] if isinstance(f, np.ndarray) and f.ndim == 1 else list(f)
        total = np.zeros(model.n)
        for fj in fs:
            fj = np.asarray(fj).ravel()
            if fj.size != model.n:
                raise ValueError(
                    f"force vector has {fj.size} entries, model wants {model.n}"
                )
            total = total + fj
        z = z + (model.phi_pinv() @ total) * dt
    return ReducedState(z, s.frame + 1)


def kinetic_energy(u_flat, h):
    """0.5 * h^2 * sum of squared face velocities of a flat state."""
    u_flat = np.asarray(u_flat)
    return 0.5 * h * h * float(np.vdot(u_flat, u_flat).real)


def rollout(
    model,
    z0,
    frames,
    ctrl=None,
    q_seq=None,
    f_seq=None,
    edit=None,
    density0=None,
    backward=False,
):
    """Repeatedly step and decode; frame k of the output is the state
    k steps after (or before, when ``backward``) the initial one.

    ``q_seq`` / ``f_seq`` supply per-frame control and force inputs.
    When ``density0`` (a ScalarField) is given, a smoke field is
    advected through the decoded velocities for visualization and
    returned alongside; the density is not part of the learned state.
    """
    if frames < 1:
        raise ValueError("frames must be >= 1")
    if edit is not None:
        from .editing import apply_edit

        model = apply_edit(model, edit)
    s = _as_state(z0)
    out = np.empty((model.n, frames))
    densities = None
    density = None
    if density0 is not None:
        if not isinstance(model.grid_meta, GridSpec):
            raise ValueError("density advection needs grid metadata on the model")
        density = density0.copy()
        densities = np.empty((density.values.shape[0], density.values.shape[1], frames))
    for k in range(frames):
        if backward:
            s = inverse_step(model, s)
        elif q_seq is not None or f_seq is not None:
            s = step_forced(
                model,
                ctrl,
                s,
                q=None if q_seq is None else q_seq[k],
                f=None if f_seq is None else f_seq[k],
            )
        else:
            s = step(model, s)
        out[:, k] = decode(model, s)
        if density is not None:
            from .solver import advect_semi_lagrangian

            vel = unflatten(out[:, k], model.grid_meta)
            dt = -model.dt if backward else model.dt
            density = advect_semi_lagrangian(vel, density, dt)
            densities[:, :, k] = density.values
    return out, densities
