"""Dense linear-algebra kernels used by the reduction stack.

Thin, deterministic wrappers over LAPACK plus a sketched SVD for
matrices too large to factor directly. All factors are returned
sign-canonicalized: the largest-magnitude entry of each left singular
vector (or eigenvector) is rotated to be real and positive, which makes
results reproducible across runs and keeps conjugate structure intact.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError


@dataclass
class SvdResult:
    """Truncated SVD factors: ``M ~ U @ diag(S) @ V.conj().T``."""

    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def reconstruct(self):
        return (self.U * self.S) @ self.V.conj().T


def _canonicalize(U, V):
    """Rotate each column pair so U's largest-magnitude entry is positive real."""
    U = U.copy()
    V = V.copy()
    for k in range(U.shape[1]):
        idx = np.argmax(np.abs(U[:, k]))
        pivot = U[idx, k]
        mag = abs(pivot)
        if mag == 0.0:
            continue
        phase = pivot / mag
        U[:, k] /= phase
        V[:, k] /= phase
    if not np.iscomplexobj(U):
        return U, V
    return U, V


def truncated_svd(M, r):
    """Top-``r`` factors of a dense SVD.

    The reconstruction ``U S V*`` is the best rank-r Frobenius
    approximation of ``M``.
    """
    M = np.asarray(M)
    kmax = min(M.shape)
    if not 1 <= r <= kmax:
        raise ValueError(f"rank {r} out of range [1, {kmax}]")
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    U, V = _canonicalize(U[:, :r], Vh[:r].conj().T)
    return SvdResult(U, s[:r].copy(), V)


def randomized_svd(M, r, oversample=10, power_iters=2, seed=None):
    """Sketched SVD: Gaussian range finder, power iterations, small SVD.

    Draw a Gaussian test matrix with ``r + oversample`` columns, capture
    the range of ``M`` in an orthonormal ``Q`` (re-orthonormalizing
    between the ``power_iters`` passes of ``M M*``), project to
    ``B = Q* M``, run a dense SVD on the small ``B``, and lift the left
    factors back through ``Q``. Deterministic for a fixed ``seed``.
    """
    M = np.asarray(M)
    rows, cols = M.shape
    l = r + oversample
    if not 1 <= r <= min(rows, cols):
        raise ValueError(f"rank {r} out of range [1, {min(rows, cols)}]")
    if l > min(rows, cols):
        raise ValueError(
            f"rank + oversample = {l} exceeds min dimension {min(rows, cols)}"
        )
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((cols, l))
    Q, _ = np.linalg.qr(M @ G)
    for _ in range(power_iters):
        W, _ = np.linalg.qr(M.conj().T @ Q)
        Q, _ = np.linalg.qr(M @ W)
    B = Q.conj().T @ M
    Ub, s, Vh = np.linalg.svd(B, full_matrices=False)
    U = Q @ Ub
    U, V = _canonicalize(U[:, :r], Vh[:r].conj().T)
    return SvdResult(U, s[:r].copy(), V)


def pinv(M, rel_tol=1e-12):
    """SVD pseudoinverse; singular values below ``rel_tol * s_max`` are dropped."""
    if not 0 < rel_tol < 1:
        raise ValueError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    M = np.asarray(M)
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((M.shape[1], M.shape[0]), dtype=M.dtype)
    keep = s > rel_tol * s[0]
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    return (Vh.conj().T * inv_s) @ U.conj().T


def eig_small(M, max_dim=2000):
    """Dense eigendecomposition with a residual check.

    Returns (values, vectors) with unit-norm eigenvector columns.
    Raises ConvergenceError when LAPACK fails or the residual
    ``||M V - V diag(w)||`` exceeds ``1e-8 * ||M||``.
    """
    M = np.asarray(M)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix must be square, got {M.shape}")
    if M.shape[0] > max_dim:
        raise ValueError(f"dense eig limited to {max_dim}, got {M.shape[0]}")
    try:
        w, V = np.linalg.eig(M)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigendecomposition failed: {exc}") from exc
    norms = np.linalg.norm(V, axis=0)
    norms[norms == 0.0] = 1.0
    V = V / norms
    scale = np.linalg.norm(M)
    resid = np.linalg.norm(M @ V - V * w)
    if scale > 0 and resid > 1e-8 * scale:
        raise ConvergenceError(
            f"eigendecomposition residual {resid:.3e} exceeds 1e-8 * ||M||",
            residual=resid,
        )
    return w, V


def lstsq(A, B):
    """Minimum-norm least-squares solution of ``A X = B`` (SVD-based)."""
    A = np.asarray(A)
    B = np.asarray(B)
    X, _, _, _ = np.linalg.lstsq(A, B, rcond=None)
    return X
