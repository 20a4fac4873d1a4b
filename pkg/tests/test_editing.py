import numpy as np
import pytest

from conftest import stable_linear_system
from flowdmd.dmd import ReducedModel, exact_dmd
from flowdmd.editing import EditSpec, apply_edit, band_energy, cluster_modes, omega
from flowdmd.runtime import ReducedState, decode, encode, rollout, step


@pytest.fixture(scope="module")
def model():
    data, _ = stable_linear_system(n=80, rank=6, frames=50, seed=30)
    return exact_dmd(data, 6)


def make_model(lams, dt=1.0, seed=0):
    """Synthetic model with prescribed eigenvalues and conjugate-pair modes."""
    rng = np.random.default_rng(seed)
    lams = np.asarray(lams, dtype=complex)
    r = lams.size
    n = 4 * r
    cols = []
    for lam in lams:
        if lam.imag == 0:
            cols.append(rng.standard_normal(n).astype(complex))
        else:
            cols.append(rng.standard_normal(n) + 1j * rng.standard_normal(n))
    phi = np.stack(cols, axis=1)
    # lock conjugate partners exactly, mirroring the trainers
    for i, lam in enumerate(lams):
        for j in range(i + 1, r):
            if lams[j] == np.conj(lam) and lam.imag > 0:
                phi[:, j] = np.conj(phi[:, i])
    phi /= np.linalg.norm(phi, axis=0)
    return ReducedModel(phi, lams, np.ones(r), dt)


class TestOmega:
    def test_unit_eigenvalue(self):
        m = make_model([1.0])
        np.testing.assert_allclose(omega(m), [0.0])

    def test_analytic_log(self):
        m = make_model([np.exp(0.1 + 0.2j), np.exp(0.1 - 0.2j)], dt=1.0)
        np.testing.assert_allclose(omega(m), [0.1 + 0.2j, 0.1 - 0.2j], atol=1e-12)

    def test_principal_branch_at_minus_one(self):
        m = make_model([-1.0])
        np.testing.assert_allclose(omega(m), [1j * np.pi], atol=1e-12)

    def test_zero_eigenvalue_rejected(self):
        m = make_model([0.9, 0.0])
        with pytest.raises(ValueError):
            omega(m)


class TestClusterModes:
    def test_threshold_partition(self):
        # |Im Omega| of 0, 0.005, 0.005, 0.5, 0.5 with dt = 1
        lams = [
            1.0,
            np.exp(0.005j),
            np.exp(-0.005j),
            np.exp(0.5j),
            np.exp(-0.5j),
        ]
        m = make_model(lams)
        low, high = cluster_modes(m, 0.01)
        assert sorted(low.tolist()) == [0, 1, 2]
        assert sorted(high.tolist()) == [3, 4]

    def test_huge_threshold_all_low(self, model):
        low, high = cluster_modes(model, 1e9)
        assert low.size == model.r and high.size == 0

    def test_tiny_threshold_only_zero_frequency(self, model):
        low, high = cluster_modes(model, 1e-300)
        freq = np.abs(np.angle(model.lam)) / model.dt
        assert sorted(low.tolist()) == sorted(np.flatnonzero(freq == 0).tolist())

    def test_partition_is_exact(self, model):
        low, high = cluster_modes(model, 0.01)
        assert sorted(low.tolist() + high.tolist()) == list(range(model.r))

    def test_pairs_stay_together(self, model):
        low, _ = cluster_modes(model, 0.01)
        low_set = set(low.tolist())
        for a in range(model.r):
            b = model.pair_partner[a]
            assert (a in low_set) == (b in low_set)


class TestEditSpec:
    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            EditSpec([-0.1], [1.0], [1.0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            EditSpec([1.0, 1.0], [1.0], [1.0])

    def test_pair_mismatch_rejected(self, model):
        spec = EditSpec.identity(model.r)
        rep = [a for a in range(model.r) if model.pair_partner[a] > a][0]
        spec.weights[rep] = 2.0  # partner left at 1.0
        with pytest.raises(ValueError):
            apply_edit(model, spec)

    def test_dim_mismatch_rejected(self, model):
        with pytest.raises(ValueError):
            apply_edit(model, EditSpec.identity(model.r + 1))


class TestApplyEdit:
    def test_identity_reproduces_rollout(self, model):
        spec = EditSpec.identity(model.r)
        edited = apply_edit(model, spec)
        assert np.array_equal(edited.lam, model.lam)
        assert np.array_equal(edited.phi, model.phi)
        rng = np.random.default_rng(31)
        z0 = encode(model, rng.standard_normal(model.n))
        a, _ = rollout(model, z0, 20)
        b, _ = rollout(edited, ReducedState(z0.z.copy()), 20)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_original_untouched(self, model):
        lam_before = model.lam.copy()
        spec = EditSpec.identity(model.r)
        spec.weights[:] = 0.5
        apply_edit(model, spec)
        assert np.array_equal(model.lam, lam_before)

    def test_weight_scales_contribution_exactly(self, model):
        rng = np.random.default_rng(32)
        z = encode(model, rng.standard_normal(model.n)).z
        rep = [a for a in range(model.r) if model.pair_partner[a] > a][0]
        pair = (rep, model.pair_partner[rep])
        w = 1.7
        spec = EditSpec.identity(model.r)
        spec.weights[list(pair)] = w
        edited = apply_edit(model, spec)
        base = decode(model, z)
        zc = np.zeros_like(z)
        zc[list(pair)] = z[list(pair)]
        mode_field = decode(model, zc)
        np.testing.assert_allclose(
            decode(edited, z), base + (w - 1) * mode_field, atol=1e-10
        )

    def test_growth_scale_maps_modulus_power(self, model):
        s = 1.7
        spec = EditSpec.identity(model.r)
        spec.growth_scale[:] = s
        edited = apply_edit(model, spec)
        np.testing.assert_allclose(
            np.abs(edited.lam), np.abs(model.lam) ** s, rtol=1e-12
        )
        np.testing.assert_allclose(
            np.angle(edited.lam), np.angle(model.lam), atol=1e-12
        )

    def test_freq_scale_maps_argument(self, model):
        s = 0.5
        spec = EditSpec.identity(model.r)
        spec.freq_scale[:] = s
        edited = apply_edit(model, spec)
        np.testing.assert_allclose(
            np.angle(edited.lam), s * np.angle(model.lam), atol=1e-12
        )
        np.testing.assert_allclose(np.abs(edited.lam), np.abs(model.lam), rtol=1e-12)

    def test_freq_scale_halves_oscillation_period(self):
        theta = 0.2
        m = make_model([np.exp(1j * theta), np.exp(-1j * theta)], seed=3)
        z0 = encode(m, decode(m, np.array([0.5 + 0.1j, 0.5 - 0.1j])))
        frames = 315  # about 10 periods at theta = 0.2
        base, _ = rollout(m, ReducedState(z0.z.copy()), frames)
        spec = EditSpec.identity(2)
        spec.freq_scale[:] = 2.0
        fast, _ = rollout(apply_edit(m, spec), ReducedState(z0.z.copy()), frames)

        def crossings(sig):
            return int(np.sum(np.abs(np.diff(np.signbit(sig))) > 0))

        probe = np.argmax(np.abs(base).mean(axis=1))
        c_base = crossings(base[probe])
        c_fast = crossings(fast[probe])
        assert abs(c_fast - 2 * c_base) <= 2

    def test_cluster_weight_ratios_move_band_energy(self):
        lams = [0.999, np.exp(0.004j), np.exp(-0.004j), np.exp(0.6j), np.exp(-0.6j)]
        m = make_model(lams, seed=8)
        rng = np.random.default_rng(33)
        z = encode(m, rng.standard_normal(m.n)).z
        low, high = cluster_modes(m, threshold=0.01)
        assert low.size and high.size
        smooth = apply_edit(
            m, EditSpec.per_cluster(m, 0.01, low_weight=4.0, high_weight=1.0)
        )
        detailed = apply_edit(
            m, EditSpec.per_cluster(m, 0.01, low_weight=1.0, high_weight=4.0)
        )
        # contributions scale linearly with the cluster weight, so band
        # energy scales with its square
        base_low = band_energy(m, z, low)
        base_high = band_energy(m, z, high)
        assert band_energy(smooth, z, low) == pytest.approx(16 * base_low, rel=1e-9)
        assert band_energy(smooth, z, high) == pytest.approx(base_high, rel=1e-9)
        assert band_energy(detailed, z, high) == pytest.approx(16 * base_high, rel=1e-9)
        assert band_energy(detailed, z, low) == pytest.approx(base_low, rel=1e-9)

    def test_edited_model_keeps_conjugate_pairing(self, model):
        spec = EditSpec.per_cluster(model, 0.05, high_weight=1.5, high_freq=1.3)
        edited = apply_edit(model, spec)
        for a in range(edited.r):
            b = edited.pair_partner[a]
            if b > a:
                assert np.array_equal(edited.lam[b], np.conj(edited.lam[a]))
                assert np.array_equal(edited.phi[:, b], np.conj(edited.phi[:, a]))
        rng = np.random.default_rng(34)
        u = rng.standard_normal(edited.n)
        y = edited.phi @ encode(edited, u).z
        assert np.linalg.norm(y.imag) <= 1e-8 * max(np.linalg.norm(y), 1e-300)
