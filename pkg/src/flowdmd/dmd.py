"""Fitting reduced linear time-evolution models from snapshot data.

Two trainers share one model type: a one-shot least-squares fit of the
step operator (``exact_dmd``) and a variable-projection refinement that
fits all snapshots jointly through an exponential model (``optdmd``),
which is markedly less noise-sensitive. Control channels are projected
onto a trained basis with ``fit_control``.

Modes are stored frequency-ordered (ascending |arg lambda|) with
conjugate partners adjacent and exactly conjugate, which keeps decoded
fields real and makes cluster indices stable across save/load.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError
from .linalg import eig_small, lstsq, pinv, randomized_svd, truncated_svd

UNSTABLE_MODULUS = 1.05
SIGMA_CUTOFF = 1e-14


@dataclass(eq=False)
class SnapshotMatrix:
    """Time-ordered flattened states at uniform spacing, one per column."""

    states: np.ndarray
    dt: float
    grid_meta: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.states.ndim != 2 or self.states.shape[1] < 2:
            raise ValueError("snapshot matrix needs at least 2 columns")
        if not np.isfinite(self.states).all():
            raise ValueError("snapshot matrix contains non-finite entries")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def n(self):
        return self.states.shape[0]

    @property
    def n_transitions(self):
        return self.states.shape[1] - 1


class ReducedModel:
    """Trained artifact: complex mode basis, eigenvalues, and metadata.

    ``phi`` has unit-norm columns; ``lam`` holds the per-mode step
    multipliers. The pseudoinverse of ``phi`` and a real-arithmetic
    decode table are built lazily and cached; the object is treated as
    immutable after construction.
    """

    def __init__(self, phi, lam, sigma, dt, grid_meta=None, provenance=None):
        self.phi = np.ascontiguousarray(phi, dtype=np.complex128)
        self.lam = np.ascontiguousarray(lam, dtype=np.complex128)
        self.sigma = np.ascontiguousarray(sigma, dtype=np.float64)
        self.dt = float(dt)
        self.grid_meta = grid_meta
        self.provenance = dict(provenance or {})
        if self.phi.ndim != 2:
            raise ValueError("phi must be a 2D matrix")
        if self.phi.shape[1] != self.lam.size or self.lam.size != self.sigma.size:
            raise ValueError("phi, lam, sigma sizes disagree")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        self.pair_partner = conjugate_pairs(self.lam)
        self._phi_pinv = None
        self._decode_table = None

    @property
    def n(self):
        return self.phi.shape[0]

    @property
    def r(self):
        return self.phi.shape[1]

    def phi_pinv(self):
        if self._phi_pinv is None:
            self._phi_pinv = pinv(self.phi)
        return self._phi_pinv

    def decode_table(self):
        """Real n x r matrix plus index maps for pair-aware decoding.

        For a conjugate pair with representative column ``a`` the two
        real columns are ``2 Re(phi_a)`` and ``-2 Im(phi_a)`` matched
        with coefficients ``Re(z_a)`` and ``Im(z_a)``; self-paired modes
        contribute one column. Valid whenever the coefficient vector is
        conjugate-symmetric.
        """
        if self._decode_table is None:
            cols = np.empty((self.n, self.r), dtype=np.float64)
            re_idx, im_idx = [], []
            k = 0
            for a in range(self.r):
                b = self.pair_partner[a]
                if b < a:
                    continue
                if b == a:
                    cols[:, k] = self.phi[:, a].real
                    re_idx.append((k, a))
                    k += 1
                else:
                    cols[:, k] = 2.0 * self.phi[:, a].real
                    re_idx.append((k, a))
                    cols[:, k + 1] = -2.0 * self.phi[:, a].imag
                    im_idx.append((k + 1, a))
                    k += 2
            self._decode_table = (np.ascontiguousarray(cols[:, :k]), re_idx, im_idx)
        return self._decode_table

    def with_modes(self, phi, lam, note=None):
        """New model sharing metadata; used by spectral editing."""
        prov = dict(self.provenance)
        if note:
            prov.setdefault("edits", [])
            prov["edits"] = list(prov["edits"]) + [note]
        return ReducedModel(phi, lam, self.sigma, self.dt, self.grid_meta, prov)


def conjugate_pairs(lam, tol=1e-8):
    """partner[i] = j such that lam[j] matches conj(lam[i]); i itself if real."""
    lam = np.asarray(lam)
    r = lam.size
    scale = max(float(np.abs(lam).max()), 1e-300) if r else 1.0
    partner = np.full(r, -1, dtype=np.int64)
    for i in range(r):
        if partner[i] >= 0:
            continue
        if abs(lam[i].imag) <= tol * scale:
            partner[i] = i
            continue
        best, best_d = -1, np.inf
        for j in range(r):
            if j == i or partner[j] >= 0:
                continue
            d = abs(lam[j] - np.conj(lam[i]))
            if d < best_d:
                best, best_d = j, d
        if best >= 0 and best_d <= 10 * tol * scale + tol:
            partner[i] = best
            partner[best] = i
        else:
            partner[i] = i  # unpaired; treated as its own unit
    return partner


def _order_and_pair(lam, phi):
    """Frequency-sort modes, lock conjugate partners to exact conjugates,
    and canonicalize each representative's phase."""
    r = lam.size
    partner = conjugate_pairs(lam)
    reps = []
    seen = np.zeros(r, dtype=bool)
    for i in range(r):
        if seen[i]:
            continue
        j = partner[i]
        seen[i] = seen[j] = True
        if i == j:
            reps.append((i, -1))
        else:
            a, b = (i, j) if lam[i].imag >= lam[j].imag else (j, i)
            reps.append((a, b))

    def key(pair):
        a = pair[0]
        return (abs(np.angle(lam[a])), -abs(lam[a]), lam[a].real)

    reps.sort(key=key)
    order = []
    for a, b in reps:
        order.append(a)
        if b >= 0:
            order.append(b)
    lam = lam[order].copy()
    phi = phi[:, order].copy()

    # normalize, canonicalize the representative, copy the exact conjugate
    k = 0
    while k < lam.size:
        col = phi[:, k]
        nrm = np.linalg.norm(col)
        if nrm > 0:
            col = col / nrm
        idx = np.argmax(np.abs(col))
        if abs(col[idx]) > 0:
            col = col * (np.conj(col[idx]) / abs(col[idx]))
        paired = k + 1 < lam.size and abs(lam[k + 1] - np.conj(lam[k])) <= 1e-6 * max(
            abs(lam[k]), 1e-300
        ) and lam[k].imag > 0
        phi[:, k] = col
        if paired:
            lam[k + 1] = np.conj(lam[k])
            phi[:, k + 1] = np.conj(col)
            k += 2
        else:
            if abs(lam[k].imag) <= 1e-12 * max(abs(lam[k]), 1e-300):
                lam[k] = lam[k].real
                if np.abs(col.imag).max() <= 1e-10:
                    phi[:, k] = col.real
            k += 1
    return lam, phi


def _svd_of(X, r, svd_mode, seed):
    if svd_mode == "full":
        return truncated_svd(X, r)
    if svd_mode == "randomized":
        oversample = min(10, min(X.shape) - r)
        return randomized_svd(X, r, oversample=oversample, power_iters=2, seed=seed)
    raise ValueError(f"unknown svd mode {svd_mode!r}")


def _check_sigma(svd):
    if svd.S[-1] <= SIGMA_CUTOFF * svd.S[0]:
        raise ValueError(
            f"requested rank hits numerically zero singular value "
            f"(sigma_r / sigma_1 = {svd.S[-1] / svd.S[0]:.3e}); lower the rank"
        )


def _stability_warnings(lam):
    worst = float(np.abs(lam).max()) if lam.size else 0.0
    if worst > UNSTABLE_MODULUS:
        return [f"unstable rollout: max |lambda| = {worst:.6f}"]
    return []


def exact_dmd(data, r, svd_mode="full", seed=None):
    """One-shot fit of the reduced step operator.

    Truncated SVD of the first-frames block, least-squares step operator
    in the reduced basis, eigendecomposition, and modes lifted through
    the shifted block. The one-step reconstruction residual lands in
    ``provenance["residual"]``.
    """
    X = data.states[:, :-1]
    Xp = data.states[:, 1:]
    n, T = X.shape
    if not 1 <= r <= min(n, T):
        raise ValueError(f"rank {r} out of range [1, {min(n, T)}]")
    svd = _svd_of(X, r, svd_mode, seed)
    _check_sigma(svd)
    P = Xp @ (svd.V / svd.S)  # X' V Sigma^-1
    k_hat = svd.U.conj().T @ P
    lam, W = eig_small(k_hat)
    phi = P @ W
    lam, phi = _order_and_pair(lam, phi)

    model = ReducedModel(
        phi,
        lam,
        svd.S,
        data.dt,
        grid_meta=data.grid_meta,
        provenance={"method": "exact", "svd": svd_mode, "seed": seed},
    )
    recon = (model.phi * model.lam) @ (model.phi_pinv() @ X)
    resid = float(np.linalg.norm(Xp - recon.real))
    model.provenance["residual"] = resid
    model.provenance["residual_rel"] = resid / max(np.linalg.norm(Xp), 1e-300)
    model.provenance["warnings"] = _stability_warnings(lam)
    return model


def vandermonde(alpha, T):
    """T x r matrix with entry (i, j) = alpha_j ** i for i = 0..T-1."""
    if T < 1:
        raise ValueError("T must be >= 1")
    alpha = np.asarray(alpha, dtype=np.complex128)
    return alpha[None, :] ** np.arange(T)[:, None]


@dataclass
class LMConfig:
    max_iters: int = 200
    init_damping: float = 1.0
    damping_up: float = 2.0
    damping_down: float = 3.0
    rel_tol: float = 1e-8
    collapse_tol: float = 1e-12


class _AlphaCollapse(Exception):
    pass


def _min_separation(alpha):
    if alpha.size < 2:
        return np.inf
    d = np.abs(alpha[:, None] - alpha[None, :])
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min())


def _varpro_objective(alpha, D, T):
    P = vandermonde(alpha, T)
    B = lstsq(P, D)
    R = D - P @ B
    return float(np.linalg.norm(R)), B, P, R


def _varpro_lm(D, alpha0, cfg):
    """Levenberg-Marquardt over the exponential bases with the coefficient
    matrix eliminated by the inner least-squares solve.

    Uses the Kaufman form of the projected Jacobian: only the orthogonal
    component of each basis derivative enters, which is accurate near
    the solution and much cheaper than the full derivative.
    """
    T = D.shape[0]
    t = np.arange(T)
    alpha = alpha0.astype(np.complex128).copy()
    if _min_separation(alpha) < cfg.collapse_tol:
        raise _AlphaCollapse
    f, B, P, R = _varpro_objective(alpha, D, T)
    floor = 1e-14 * np.linalg.norm(D)
    history = [f]
    if cfg.max_iters == 0:
        return alpha, B, history, True
    mu = cfg.init_damping
    converged = False
    for _ in range(cfg.max_iters):
        if f <= floor:
            converged = True
            break
        Q, _ = np.linalg.qr(P)
        dphi = np.zeros_like(P)
        dphi[1:, :] = t[1:, None] * alpha[None, :] ** (t[1:, None] - 1)
        W = dphi - Q @ (Q.conj().T @ dphi)
        JHJ = (W.conj().T @ W) * np.conj(B @ B.conj().T)
        g = np.diag(W.conj().T @ (R @ B.conj().T))
        try:
            delta = np.linalg.solve(JHJ + mu * np.eye(alpha.size), g)
        except np.linalg.LinAlgError:
            mu *= cfg.damping_up
            continue
        cand = alpha + delta
        if _min_separation(cand) < cfg.collapse_tol:
            raise _AlphaCollapse
        f_new, B_new, P_new, R_new = _varpro_objective(cand, D, T)
        if f_new < f:
            rel = (f - f_new) / max(f, 1e-300)
            alpha, f, B, P, R = cand, f_new, B_new, P_new, R_new
            history.append(f)
            mu /= cfg.damping_down
            if rel < cfg.rel_tol or f <= floor:
                converged = True
                break
        else:
            mu *= cfg.damping_up
    return alpha, B, history, converged


def optdmd(data, r, init=None, lm_config=None, svd_mode="full", seed=None):
    """Variable-projection refit of the eigenvalues against all snapshots.

    The reduced trajectory (right singular factors of the first-frames
    block) is fit by a sum of per-mode geometric progressions; the
    progression ratios are the eigenvalues, optimized by damped
    Gauss-Newton steps with the mode coefficients re-solved exactly at
    each trial point. Initialized from ``exact_dmd`` unless ``init``
    eigenvalues are given. The accepted-step objective history is
    recorded in ``provenance["objective_history"]`` and never increases.
    """
    cfg = lm_config or LMConfig()
    X = data.states[:, :-1]
    n, T = X.shape
    if not 1 <= r <= min(n, T):
        raise ValueError(f"rank {r} out of range [1, {min(n, T)}]")
    svd = _svd_of(X, r, svd_mode, seed)
    _check_sigma(svd)
    D = np.conj(svd.V) * svd.S  # T x r data matrix in the reduced basis

    if init is None:
        alpha0 = exact_dmd(data, r, svd_mode=svd_mode, seed=seed).lam
    else:
        alpha0 = np.asarray(init, dtype=np.complex128)
        if alpha0.size != r:
            raise ValueError(f"init has {alpha0.size} eigenvalues, expected {r}")

    try:
        alpha, B, history, converged = _varpro_lm(D, alpha0, cfg)
    except _AlphaCollapse:
        rng = np.random.default_rng(0 if seed is None else seed)
        jitter = 1e-10 * (1.0 + np.abs(alpha0)) * np.exp(
            2j * np.pi * rng.random(alpha0.size)
        )
        try:
            alpha, B, history, converged = _varpro_lm(D, alpha0 + jitter, cfg)
        except _AlphaCollapse:
            raise ConvergenceError(
                "eigenvalue iterates collapsed below separation tolerance twice"
            ) from None

    # enforce the conjugate symmetry real data guarantees, unless doing so
    # would (pathologically) raise the objective above the final iterate
    alpha_sym, B_sym = _symmetrize(alpha, B)
    f_sym = float(np.linalg.norm(D - vandermonde(alpha_sym, T) @ B_sym))
    if f_sym <= history[-1] * (1 + 1e-9) and f_sym <= history[0] * (1 + 1e-12):
        alpha, B = alpha_sym, B_sym

    phi = svd.U @ B.T
    lam, phi = _order_and_pair(alpha, phi)

    model = ReducedModel(
        phi,
        lam,
        svd.S,
        data.dt,
        grid_meta=data.grid_meta,
        provenance={
            "method": "optdmd",
            "svd": svd_mode,
            "seed": seed,
            "objective_history": history,
            "converged": converged,
        },
    )
    warns = _stability_warnings(lam)
    if not converged and cfg.max_iters > 0:
        warns.append(f"variable projection hit max_iters={cfg.max_iters}")
        warnings.warn(warns[-1], RuntimeWarning, stacklevel=2)
    model.provenance["warnings"] = warns
    return model


def _symmetrize(alpha, B):
    partner = conjugate_pairs(alpha)
    alpha = alpha.copy()
    B = B.copy()
    for i in range(alpha.size):
        j = partner[i]
        if j > i:
            a = 0.5 * (alpha[i] + np.conj(alpha[j]))
            alpha[i] = a
            alpha[j] = np.conj(a)
            row = 0.5 * (B[i, :] + np.conj(B[j, :]))
            B[i, :] = row
            B[j, :] = np.conj(row)
        elif j == i and abs(alpha[i].imag) <= 1e-8 * max(abs(alpha[i]), 1e-300):
            alpha[i] = alpha[i].real
            B[i, :] = B[i, :].real
    return alpha, B


@dataclass
class ControlOperator:
    """Reduced projections of force-response matrices, one per channel."""

    reduced_b: list
    labels: list

    def __post_init__(self):
        if len(self.reduced_b) != len(self.labels):
            raise ValueError("one label per channel required")
        self.reduced_b = [np.asarray(m, dtype=np.complex128) for m in self.reduced_b]


def fit_control(model, channels, labels=None):
    """Project each force-response matrix into the trained basis.

    ``channels`` is a list of (n x M_i) matrices (dense or sparse); the
    reduced matrices ``phi_pinv @ B_i`` are precomputed once so forced
    stepping stays an O(r M) operation.
    """
    labels = labels or [f"channel_{k}" for k in range(len(channels))]
    pp = model.phi_pinv()
    reduced = []
    for mat in channels:
        if mat.shape[0] != model.n:
            raise ValueError(
                f"channel has {mat.shape[0]} rows, model state length is {model.n}"
            )
        if hasattr(mat, "toarray") and not isinstance(mat, np.ndarray):
            red = (mat.T.dot(pp.conj().T)).conj().T  # sparse-friendly pp @ mat
        else:
            red = pp @ np.asarray(mat)
        reduced.append(red)
    return ControlOperator(reduced, list(labels))


def check_constraints(model, C):
    """Max violation of a linear constraint over all mode columns.

    Returns ``max(|C Re(phi)|, |C Im(phi)|)`` entrywise; purely
    diagnostic, never raises on large values.
    """
    if np.isscalar(C) and C == 0:
        return 0.0
    re = C @ model.phi.real
    im = C @ model.phi.imag
    re = re.toarray() if hasattr(re, "toarray") else np.asarray(re)
    im = im.toarray() if hasattr(im, "toarray") else np.asarray(im)
    vals = [np.abs(re).max() if re.size else 0.0, np.abs(im).max() if im.size else 0.0]
    return float(max(vals))
