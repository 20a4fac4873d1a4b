import numpy as np

from flowdmd.dmd import SnapshotMatrix


def stable_linear_system(n, rank, frames, seed, noise=0.0, dt=0.1):
    """Snapshots of a known stable linear map plus its true eigenvalues.

    The generator is a random orthogonal embedding of rank/2 rotation
    blocks with moduli in [0.9, 0.999], so its nonzero spectrum is known
    exactly and every trajectory stays bounded.
    """
    rng = np.random.default_rng(seed)
    pairs = rank // 2
    moduli = rng.uniform(0.9, 0.999, pairs)
    thetas = rng.uniform(0.05, 0.8, pairs)
    blocks = []
    eigs = []
    for rho, th in zip(moduli, thetas):
        blocks.append(rho * np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]]))
        eigs.extend([rho * np.exp(1j * th), rho * np.exp(-1j * th)])
    if rank % 2:
        rho = rng.uniform(0.9, 0.999)
        blocks.append(np.array([[rho]]))
        eigs.append(rho + 0j)
    gen = np.zeros((rank, rank))
    at = 0
    for blk in blocks:
        w = blk.shape[0]
        gen[at : at + w, at : at + w] = blk
        at += w
    Q, _ = np.linalg.qr(rng.standard_normal((n, rank)))
    y = rng.standard_normal(rank)
    cols = np.empty((n, frames))
    for k in range(frames):
        cols[:, k] = Q @ y
        y = gen @ y
    cols /= np.sqrt(np.mean(cols**2))
    if noise:
        cols = cols + noise * rng.standard_normal(cols.shape)
    return SnapshotMatrix(cols, dt), np.asarray(eigs)


def eigenvalue_error(true_eigs, est_eigs):
    """Mean distance from each true eigenvalue to its nearest estimate."""
    true_eigs = np.asarray(true_eigs)
    est_eigs = np.asarray(est_eigs)
    return float(
        np.mean([np.abs(est_eigs - t).min() for t in true_eigs])
    )
