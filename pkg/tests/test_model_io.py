import os

import numpy as np
import pytest

from conftest import stable_linear_system
from flowdmd.dmd import ReducedModel, SnapshotMatrix, exact_dmd
from flowdmd.editing import EditSpec
from flowdmd.errors import (
    BadMagicError,
    BadVersionError,
    ChecksumError,
    SizeMismatchError,
)
from flowdmd.grid import GridSpec
from flowdmd import model_io
from flowdmd.solver import SceneConfig, generate_dataset

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")


def golden_model():
    """Deterministic small model built without any RNG."""
    grid = GridSpec(2, 2, 0.25, boundary="open")
    n, r = grid.n_state, 2
    base = np.linspace(-1.0, 1.0, n * r).reshape(n, r, order="F")
    phi = base + 1j * base[::-1]
    phi = phi / np.linalg.norm(phi, axis=0)
    lam = np.array([0.97 + 0.11j, 0.97 - 0.11j])
    sigma = np.array([2.0, 1.0])
    return ReducedModel(
        phi, lam, sigma, 0.05, grid, {"method": "exact", "svd": "full"}
    )


def golden_dataset():
    grid = GridSpec(2, 2, 0.25)
    states = np.arange(grid.n_state * 3, dtype=np.float64).reshape(grid.n_state, 3)
    states[0, 0] = -1.5
    return SnapshotMatrix(states, 0.125, grid, {"solver": "handmade"})


class TestKvText:
    def test_round_trip(self):
        text = model_io.kv_dumps({"a": 1, "b": 2.5, "c": "hello", "d": True})
        kv = model_io.kv_loads(text)
        assert kv == {"a": "1", "b": "2.5", "c": "hello", "d": "true"}

    def test_comments_and_blanks_ignored(self):
        kv = model_io.kv_loads("# header\n\nx = 3\n")
        assert kv == {"x": "3"}

    def test_malformed_line_rejected(self):
        with pytest.raises(ValueError):
            model_io.kv_loads("not a pair\n")

    def test_float_repr_round_trips_exactly(self):
        val = 0.1 + 0.2
        text = model_io.kv_dumps({"v": val})
        assert float(model_io.kv_loads(text)["v"]) == val


class TestModelFile:
    def test_round_trip_bitwise(self, tmp_path):
        data, _ = stable_linear_system(n=40, rank=6, frames=30, seed=40)
        model = exact_dmd(data, 6)
        path = tmp_path / "m.kdmd"
        model_io.save_model(path, model)
        back = model_io.load_model(path)
        assert np.array_equal(back.phi, model.phi)
        assert np.array_equal(back.lam, model.lam)
        assert np.array_equal(back.sigma, model.sigma)
        assert back.dt == model.dt
        # a second save is byte-identical
        path2 = tmp_path / "m2.kdmd"
        model_io.save_model(path2, back)
        assert path.read_bytes() == path2.read_bytes()

    def test_grid_metadata_round_trip(self, tmp_path):
        mask = np.zeros(16, dtype=bool)
        mask[5] = True
        grid = GridSpec(4, 4, 0.5, boundary="open", solid_mask=mask)
        model = golden_model()
        model = ReducedModel(
            np.ones((grid.n_state, 1)), [0.9], [1.0], 0.1, grid, {}
        )
        path = tmp_path / "g.kdmd"
        model_io.save_model(path, model)
        back = model_io.load_model(path)
        assert back.grid_meta == grid

    def test_truncated_file_size_error(self, tmp_path):
        path = tmp_path / "m.kdmd"
        model_io.save_model(path, golden_model())
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 9])
        with pytest.raises(SizeMismatchError):
            model_io.load_model(path)

    def test_flipped_byte_checksum_error(self, tmp_path):
        path = tmp_path / "m.kdmd"
        model_io.save_model(path, golden_model())
        blob = bytearray(path.read_bytes())
        blob[60] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(ChecksumError):
            model_io.load_model(path)

    def test_bad_magic_error(self, tmp_path):
        path = tmp_path / "m.kdmd"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(BadMagicError):
            model_io.load_model(path)

    def test_bad_version_error(self, tmp_path):
        path = tmp_path / "m.kdmd"
        model_io.save_model(path, golden_model())
        blob = bytearray(path.read_bytes())
        blob[4] = 9
        path.write_bytes(bytes(blob))
        with pytest.raises(BadVersionError):
            model_io.load_model(path)

    def test_golden_file_bytes_stable(self, tmp_path):
        path = tmp_path / "m.kdmd"
        model_io.save_model(path, golden_model())
        golden = os.path.join(GOLDEN_DIR, "model_golden.kdmd")
        assert path.read_bytes() == open(golden, "rb").read()

    def test_endianness_normalized_on_save(self, tmp_path):
        m = golden_model()
        big = ReducedModel(
            m.phi.astype(">c16"),
            m.lam.astype(">c16"),
            m.sigma.astype(">f8"),
            m.dt,
            m.grid_meta,
            m.provenance,
        )
        a = tmp_path / "a.kdmd"
        b = tmp_path / "b.kdmd"
        model_io.save_model(a, m)
        model_io.save_model(b, big)
        assert a.read_bytes() == b.read_bytes()


class TestDatasetDir:
    def test_round_trip_bitwise(self, tmp_path):
        snap = golden_dataset()
        path = tmp_path / "ds"
        model_io.save_dataset(path, snap)
        back = model_io.load_dataset(path)
        assert np.array_equal(back.states, snap.states)
        assert back.dt == snap.dt
        assert back.grid_meta == snap.grid_meta

    def test_manifest_size_mismatch(self, tmp_path):
        snap = golden_dataset()
        path = tmp_path / "ds"
        model_io.save_dataset(path, snap)
        bin_path = path / "snapshots.bin"
        bin_path.write_bytes(bin_path.read_bytes()[:-8])
        with pytest.raises(SizeMismatchError):
            model_io.load_dataset(path)

    def test_corrupt_payload_checksum(self, tmp_path):
        snap = golden_dataset()
        path = tmp_path / "ds"
        model_io.save_dataset(path, snap)
        bin_path = path / "snapshots.bin"
        blob = bytearray(bin_path.read_bytes())
        blob[3] ^= 0x01
        bin_path.write_bytes(bytes(blob))
        with pytest.raises(ChecksumError):
            model_io.load_dataset(path)

    def test_generated_dataset_trains_end_to_end(self, tmp_path):
        scene = SceneConfig(kind="plume", nx=16, ny=32, h=1.0 / 16, frames=30)
        snap, dens = generate_dataset(scene)
        path = tmp_path / "plume"
        model_io.save_dataset(path, snap, dens)
        back = model_io.load_dataset(path)
        assert np.array_equal(back.states, snap.states)
        dens_back = model_io.load_dataset_density(path)
        assert np.array_equal(dens_back, dens)
        assert isinstance(back.meta.get("scene"), SceneConfig)
        model = exact_dmd(back, 6)
        assert model.r == 6

    def test_golden_dataset_bytes_stable(self, tmp_path):
        path = tmp_path / "ds"
        model_io.save_dataset(path, golden_dataset())
        golden = os.path.join(GOLDEN_DIR, "dataset_golden")
        for name in ("manifest", "snapshots.bin"):
            assert (path / name).read_bytes() == open(
                os.path.join(golden, name), "rb"
            ).read()


class TestSceneAndEditFiles:
    def test_scene_round_trip(self, tmp_path):
        scene = SceneConfig(
            kind="buoyant_region",
            nx=48,
            ny=48,
            h=1.0 / 48,
            boundary="closed",
            frames=77,
            region_up=0.3,
        )
        path = tmp_path / "scene.cfg"
        model_io.save_scene(path, scene)
        back = model_io.load_scene(path)
        assert back == scene

    def test_edit_round_trip(self, tmp_path):
        spec = EditSpec(
            np.array([1.0, 0.5, 0.5]),
            np.array([1.0, 2.0, 2.0]),
            np.array([1.0, 1.5, 1.5]),
            cluster_threshold=0.02,
        )
        path = tmp_path / "edit.cfg"
        model_io.save_edit(path, spec)
        back = model_io.load_edit(path)
        assert np.array_equal(back.weights, spec.weights)
        assert np.array_equal(back.growth_scale, spec.growth_scale)
        assert np.array_equal(back.freq_scale, spec.freq_scale)
        assert back.cluster_threshold == spec.cluster_threshold

    def test_edit_r_mismatch_rejected(self):
        with pytest.raises(ValueError):
            model_io.edit_from_kv(
                {"kind": "editspec", "r": "4", "weights": "1,1",
                 "growth_scale": "1,1", "freq_scale": "1,1"}
            )
