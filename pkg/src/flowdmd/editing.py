"""Spectral editing of trained models.

Edits act on the continuous-time rates Omega = log(lambda) / dt: the
real part is the growth/decay rate, the imaginary part the angular
frequency. Scaling those and re-exponentiating keeps the spectrum well
defined even for negative-real eigenvalues. Per-mode weights scale the
mode columns themselves so an edit survives encode/decode round trips
and serialization.

Conjugate partners always carry identical weights and scales; breaking
that would leak imaginary parts into decoded fields.
"""

from dataclasses import dataclass

import numpy as np

DEFAULT_CLUSTER_THRESHOLD = 0.01


def omega(model):
    """Continuous-time rates: principal log of the eigenvalues over dt."""
    zero = np.flatnonzero(model.lam == 0)
    if zero.size:
        raise ValueError(
            f"modes {zero.tolist()} have zero eigenvalue; no continuous rate exists"
        )
    return np.log(model.lam) / model.dt


def cluster_modes(model, threshold=DEFAULT_CLUSTER_THRESHOLD):
    """Split mode indices into (low, high) frequency clusters.

    A mode is low-frequency when |Im(Omega)| < threshold. Conjugate
    partners share |Im(Omega)| exactly, so pairs never straddle the
    cut. Returns two index arrays that partition range(r).
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    freq = np.abs(omega(model).imag)
    low = np.flatnonzero(freq < threshold)
    high = np.flatnonzero(freq >= threshold)
    return low, high


@dataclass
class EditSpec:
    """Per-mode weight, growth-rate, and frequency adjustments.

    ``weights`` scales mode columns (0 removes a mode), ``growth_scale``
    multiplies Re(Omega), ``freq_scale`` multiplies Im(Omega). All
    default to identity.
    """

    weights: np.ndarray
    growth_scale: np.ndarray
    freq_scale: np.ndarray
    cluster_threshold: float = DEFAULT_CLUSTER_THRESHOLD

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).ravel()
        self.growth_scale = np.asarray(self.growth_scale, dtype=np.float64).ravel()
        self.freq_scale = np.asarray(self.freq_scale, dtype=np.float64).ravel()
        sizes = {self.weights.size, self.growth_scale.size, self.freq_scale.size}
        if len(sizes) != 1:
            raise ValueError("weights, growth_scale, freq_scale must share a length")
        for name in ("weights", "growth_scale", "freq_scale"):
            arr = getattr(self, name)
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite entries")
        if (self.weights < 0).any():
            raise ValueError("weights must be >= 0")
        if not self.cluster_threshold > 0:
            raise ValueError("cluster_threshold must be positive")

    @property
    def r(self):
        return self.weights.size

    @classmethod
    def identity(cls, r, cluster_threshold=DEFAULT_CLUSTER_THRESHOLD):
        return cls(np.ones(r), np.ones(r), np.ones(r), cluster_threshold)

    @classmethod
    def per_cluster(
        cls,
        model,
        threshold=DEFAULT_CLUSTER_THRESHOLD,
        low_weight=1.0,
        high_weight=1.0,
        low_growth=1.0,
        high_growth=1.0,
        low_freq=1.0,
        high_freq=1.0,
    ):
        """One knob per frequency cluster, expanded to per-mode arrays."""
        low, high = cluster_modes(model, threshold)
        spec = cls.identity(model.r, threshold)
        spec.weights[low] = low_weight
        spec.weights[high] = high_weight
        spec.growth_scale[low] = low_growth
        spec.growth_scale[high] = high_growth
        spec.freq_scale[low] = low_freq
        spec.freq_scale[high] = high_freq
        return spec

    def is_identity(self):
        return (
            np.all(self.weights == 1.0)
            and np.all(self.growth_scale == 1.0)
            and np.all(self.freq_scale == 1.0)
        )

    def validate_against(self, model):
        if self.r != model.r:
            raise ValueError(f"spec has {self.r} entries, model rank is {model.r}")
        for a in range(model.r):
            b = model.pair_partner[a]
            if b <= a:
                continue
            for name in ("weights", "growth_scale", "freq_scale"):
                arr = getattr(self, name)
                if arr[a] != arr[b]:
                    raise ValueError(
                        f"{name} differs across conjugate pair ({a}, {b}); "
                        "pairs must be edited together"
                    )


def apply_edit(model, spec):
    """Build a new model with the edit applied; the original is untouched.

    phi_i <- w_i phi_i and
    lambda_i <- exp((g_i Re(Omega_i) + i f_i Im(Omega_i)) dt),
    with conjugate pairs re-locked exactly afterwards.
    """
    spec.validate_against(model)
    if spec.is_identity():
        return model.with_modes(model.phi.copy(), model.lam.copy(), note="identity")
    om = omega(model)
    new_om = spec.growth_scale * om.real + 1j * spec.freq_scale * om.imag
    new_lam = np.exp(new_om * model.dt)
    new_phi = model.phi * spec.weights[None, :]
    for a in range(model.r):
        b = model.pair_partner[a]
        if b > a:
            new_lam[b] = np.conj(new_lam[a])
            new_phi[:, b] = np.conj(new_phi[:, a])
    return model.with_modes(new_phi, new_lam, note="spectral edit")


def band_energy(model, z, indices):
    """Kinetic-energy share of one mode subset in a decoded state.

    Used to verify cluster weight ratios: the decoded contribution of a
    cluster is linear in its weights, so scaling the cluster scales this
    measure quadratically.
    """
    from .runtime import decode

    mask = np.zeros(model.r, dtype=bool)
    mask[np.asarray(indices, dtype=int)] = True
    zc = np.where(mask, z, 0.0)
    contrib = decode(model, zc)
    return float(np.vdot(contrib, contrib).real)
