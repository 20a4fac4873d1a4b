"""On-disk formats and the shared structured-text codec.

Model files are a single little-endian binary blob with a trailing
CRC32; datasets are a directory holding a human-readable manifest plus
raw f64 snapshot columns. Scene configurations and edit specs use the
same line-oriented ``key = value`` text format as the manifests, so the
CLI, the HTTP service, and tests all parse one schema. Byte layouts are
documented with hex dumps in docs/formats.md and are normative: writers
must produce byte-identical output for identical inputs on any
platform.
"""

import os
import zlib
from dataclasses import fields as dataclass_fields

import numpy as np

from .dmd import ReducedModel, SnapshotMatrix
from .editing import EditSpec
from .errors import (
    BadMagicError,
    BadVersionError,
    ChecksumError,
    SizeMismatchError,
)
from .grid import GridSpec
from .solver import SceneConfig

MAGIC = b"KDMD"
VERSION = 1
_U32 = np.dtype("<u4")
_U64 = np.dtype("<u8")
_F64 = np.dtype("<f8")
_C128 = np.dtype("<c16")

MANIFEST_NAME = "manifest"
SNAPSHOTS_NAME = "snapshots.bin"
DENSITY_NAME = "density.bin"


# ---------------------------------------------------------------------------
# key = value text codec


def kv_dumps(pairs):
    """Serialize a mapping of strings to the shared text format."""
    lines = []
    for key, value in pairs.items():
        key = str(key)
        value = format_value(value)
        if "=" in key or "\n" in key:
            raise ValueError(f"illegal key {key!r}")
        if "\n" in value:
            raise ValueError(f"value for {key!r} contains a newline")
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def kv_loads(text):
    """Parse the shared text format into an ordered dict of strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def format_value(value):
    """Canonical text for a scalar or a flat list of scalars."""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple, np.ndarray)):
        return ",".join(format_value(v) for v in np.asarray(value).ravel().tolist())
    return str(value)


def parse_bool(text):
    if text == "true":
        return True
    if text == "false":
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def parse_floats(text):
    if text.strip() == "":
        return np.zeros(0)
    return np.array([float(v) for v in text.split(",")])


# ---------------------------------------------------------------------------
# grid metadata block


def grid_to_kv(grid):
    if grid is None:
        return {"kind": "none"}
    if isinstance(grid, GridSpec):
        out = {
            "kind": "grid",
            "nx": grid.nx,
            "ny": grid.ny,
            "h": grid.h,
            "boundary": grid.boundary,
        }
        solids = np.flatnonzero(grid.solids().ravel())
        if solids.size:
            out["solid_cells"] = solids.tolist()
        return out
    raise ValueError(f"cannot serialize grid metadata of type {type(grid).__name__}")


def grid_from_kv(kv):
    kind = kv.get("kind", "none")
    if kind == "none":
        return None
    if kind != "grid":
        raise ValueError(f"unknown grid block kind {kind!r}")
    nx = int(kv["nx"])
    ny = int(kv["ny"])
    mask = None
    if "solid_cells" in kv:
        mask = np.zeros(nx * ny, dtype=bool)
        mask[[int(v) for v in kv["solid_cells"].split(",")]] = True
    return GridSpec(nx, ny, float(kv["h"]), kv["boundary"], mask)


# ---------------------------------------------------------------------------
# model files


def _pack_u32(v):
    return np.asarray([v], dtype=_U32).tobytes()


def _pack_u64(v):
    return np.asarray([v], dtype=_U64).tobytes()


def save_model(path, model):
    """Write a model file; see docs/formats.md for the byte layout."""
    n, r = model.n, model.r
    grid_block = kv_dumps(grid_to_kv(model.grid_meta)).encode("utf-8")
    prov_block = kv_dumps(
        {str(k): format_value(v) for k, v in sorted(model.provenance.items())}
    ).encode("utf-8")
    parts = [
        MAGIC,
        _pack_u32(VERSION),
        _pack_u64(n),
        _pack_u64(r),
        np.asarray([model.dt], dtype=_F64).tobytes(),
        _pack_u32(len(grid_block)),
        grid_block,
        np.ascontiguousarray(model.sigma, dtype=_F64).tobytes(),
        np.ascontiguousarray(model.lam, dtype=_C128).tobytes(),
        model.phi.astype(_C128, copy=False).ravel(order="F").tobytes(),
        _pack_u32(len(prov_block)),
        prov_block,
    ]
    payload = b"".join(parts)
    blob = payload + _pack_u32(zlib.crc32(payload))
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, count, what):
        if self.pos + count > len(self.buf):
            raise SizeMismatchError(
                f"file truncated while reading {what} "
                f"(need {count} bytes at offset {self.pos}, have {len(self.buf) - self.pos})"
            )
        out = self.buf[self.pos : self.pos + count]
        self.pos += count
        return out

    def u32(self, what):
        return int(np.frombuffer(self.take(4, what), dtype=_U32)[0])

    def u64(self, what):
        return int(np.frombuffer(self.take(8, what), dtype=_U64)[0])

    def f64(self, what):
        return float(np.frombuffer(self.take(8, what), dtype=_F64)[0])


def load_model(path):
    """Read and validate a model file.

    Distinct errors for a wrong magic, an unsupported version, a payload
    whose checksum fails, and any size inconsistency.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise BadMagicError(f"{path}: not a model file (bad magic)")
    rd = _Reader(blob)
    rd.take(4, "magic")
    version = rd.u32("version")
    if version != VERSION:
        raise BadVersionError(f"{path}: unsupported version {version}")
    n = rd.u64("n")
    r = rd.u64("r")
    dt = rd.f64("dt")
    glen = rd.u32("grid block length")
    grid_raw = rd.take(glen, "grid block")
    sigma_raw = rd.take(8 * r, "sigma")
    lam_raw = rd.take(16 * r, "lambda")
    phi_raw = rd.take(16 * n * r, "phi")
    plen = rd.u32("provenance length")
    prov_raw = rd.take(plen, "provenance block")
    payload_len = rd.pos
    crc_stored = rd.u32("crc32")
    if rd.pos != len(blob):
        raise SizeMismatchError(
            f"{path}: {len(blob) - rd.pos} trailing bytes after checksum"
        )
    # structure checked out; now verify integrity before decoding text
    crc_actual = zlib.crc32(blob[:payload_len])
    if crc_stored != crc_actual:
        raise ChecksumError(
            f"{path}: checksum mismatch (stored {crc_stored:#010x}, "
            f"computed {crc_actual:#010x})"
        )
    grid_meta = grid_from_kv(kv_loads(grid_raw.decode("utf-8")))
    provenance = kv_loads(prov_raw.decode("utf-8"))
    sigma = np.frombuffer(sigma_raw, dtype=_F64).copy()
    lam = np.frombuffer(lam_raw, dtype=_C128).copy()
    phi = np.frombuffer(phi_raw, dtype=_C128).reshape((n, r), order="F").copy()
    return ReducedModel(phi, lam, sigma, dt, grid_meta, provenance)


# ---------------------------------------------------------------------------
# dataset directories


def save_dataset(path, snapshots, density=None):
    """Write a dataset directory: manifest + raw column-major snapshots."""
    os.makedirs(path, exist_ok=True)
    states = np.asarray(snapshots.states, dtype=np.float64)
    n, frames = states.shape
    blob = states.astype(_F64, copy=False).ravel(order="F").tobytes()

    grid_kv = grid_to_kv(snapshots.grid_meta)
    manifest = {"kind": "dataset", "grid_kind": grid_kv["kind"]}
    for key, value in grid_kv.items():
        if key != "kind":
            manifest[key] = value
    manifest["dt"] = snapshots.dt
    manifest["frames"] = frames
    manifest["n"] = n
    manifest["layout"] = "u_then_v_row_major"
    manifest["solver"] = snapshots.meta.get("solver", "unknown")
    manifest["snapshots_crc32"] = zlib.crc32(blob)
    manifest["has_density"] = density is not None
    scene = snapshots.meta.get("scene")
    if isinstance(scene, SceneConfig):
        for key, value in scene_to_kv(scene).items():
            manifest[f"scene.{key}"] = value
    for key, value in snapshots.meta.items():
        if key in ("scene", "solver"):
            continue
        manifest[f"meta.{key}"] = format_value(value)

    with open(os.path.join(path, SNAPSHOTS_NAME), "wb") as fh:
        fh.write(blob)
    if density is not None:
        density = np.asarray(density, dtype=np.float64)
        dblob = density.reshape(-1, frames).astype(_F64).ravel(order="F").tobytes()
        manifest["density_crc32"] = zlib.crc32(dblob)
        manifest["density_cells"] = density.reshape(-1, frames).shape[0]
        with open(os.path.join(path, DENSITY_NAME), "wb") as fh:
            fh.write(dblob)
    with open(os.path.join(path, MANIFEST_NAME), "w", encoding="utf-8") as fh:
        fh.write(kv_dumps({k: format_value(v) for k, v in manifest.items()}))


def load_dataset(path):
    """Read a dataset directory back into a SnapshotMatrix."""
    manifest_path = os.path.join(path, MANIFEST_NAME)
    if not os.path.exists(manifest_path):
        raise SizeMismatchError(f"{path}: missing {MANIFEST_NAME}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        kv = kv_loads(fh.read())
    if kv.get("kind") != "dataset":
        raise BadMagicError(f"{path}: manifest kind is {kv.get('kind')!r}")
    n = int(kv["n"])
    frames = int(kv["frames"])
    with open(os.path.join(path, SNAPSHOTS_NAME), "rb") as fh:
        blob = fh.read()
    if len(blob) != 8 * n * frames:
        raise SizeMismatchError(
            f"{path}: snapshots.bin holds {len(blob)} bytes, manifest implies "
            f"{8 * n * frames}"
        )
    if "snapshots_crc32" in kv and zlib.crc32(blob) != int(kv["snapshots_crc32"]):
        raise ChecksumError(f"{path}: snapshots.bin checksum mismatch")
    states = np.frombuffer(blob, dtype=_F64).reshape((n, frames), order="F").copy()
    grid_kv = {"kind": kv.get("grid_kind", "none")}
    for key in ("nx", "ny", "h", "boundary", "solid_cells"):
        if key in kv:
            grid_kv[key] = kv[key]
    grid_meta = grid_from_kv(grid_kv)
    meta = {"solver": kv.get("solver", "unknown")}
    scene_kv = {
        key[len("scene.") :]: value
        for key, value in kv.items()
        if key.startswith("scene.")
    }
    if scene_kv:
        meta["scene"] = scene_from_kv(scene_kv)
    for key, value in kv.items():
        if key.startswith("meta."):
            meta[key[len("meta.") :]] = value
    return SnapshotMatrix(states, float(kv["dt"]), grid_meta, meta)


def load_dataset_density(path):
    """Density frames saved alongside a dataset, or None."""
    manifest_path = os.path.join(path, MANIFEST_NAME)
    with open(manifest_path, "r", encoding="utf-8") as fh:
        kv = kv_loads(fh.read())
    if not parse_bool(kv.get("has_density", "false")):
        return None
    frames = int(kv["frames"])
    cells = int(kv["density_cells"])
    with open(os.path.join(path, DENSITY_NAME), "rb") as fh:
        blob = fh.read()
    if len(blob) != 8 * cells * frames:
        raise SizeMismatchError(f"{path}: density.bin size mismatch")
    if "density_crc32" in kv and zlib.crc32(blob) != int(kv["density_crc32"]):
        raise ChecksumError(f"{path}: density.bin checksum mismatch")
    dens = np.frombuffer(blob, dtype=_F64).reshape((cells, frames), order="F").copy()
    if "nx" in kv and "ny" in kv:
        return dens.reshape((int(kv["ny"]), int(kv["nx"]), frames))
    return dens


# ---------------------------------------------------------------------------
# scene configs


_SCENE_FIELDS = {f.name: f for f in dataclass_fields(SceneConfig)}


def scene_to_kv(scene):
    out = {}
    for name in _SCENE_FIELDS:
        value = getattr(scene, name)
        if name == "region_disks":
            flat = []
            for d in value:
                flat.extend(d)
            out[name] = format_value(flat)
        else:
            out[name] = format_value(value)
    return out


def scene_from_kv(kv):
    kwargs = {}
    for name, fld in _SCENE_FIELDS.items():
        if name not in kv:
            continue
        raw = kv[name]
        if name == "region_disks":
            flat = parse_floats(raw)
            if flat.size % 3:
                raise ValueError("region_disks needs cx,cy,r triples")
            kwargs[name] = tuple(
                tuple(flat[k : k + 3]) for k in range(0, flat.size, 3)
            )
        elif fld.type in ("int", int):
            kwargs[name] = int(raw)
        elif fld.type in ("float", float):
            kwargs[name] = float(raw)
        elif fld.type in ("bool", bool):
            kwargs[name] = parse_bool(raw)
        elif name == "region_down":
            kwargs[name] = None if raw == "none" else float(raw)
        else:
            kwargs[name] = raw
    return SceneConfig(**kwargs)


def save_scene(path, scene):
    kv = {"kind": "scene"}
    for key, value in scene_to_kv(scene).items():
        kv["scene_kind" if key == "kind" else key] = value
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(kv_dumps(kv))


def load_scene(path):
    with open(path, "r", encoding="utf-8") as fh:
        kv = kv_loads(fh.read())
    if kv.pop("kind", "scene") != "scene":
        raise ValueError(f"{path}: not a scene file")
    if "scene_kind" in kv:
        kv["kind"] = kv.pop("scene_kind")
    return scene_from_kv(kv)


# ---------------------------------------------------------------------------
# edit specs


def edit_to_kv(spec):
    return {
        "kind": "editspec",
        "r": spec.r,
        "cluster_threshold": spec.cluster_threshold,
        "weights": spec.weights,
        "growth_scale": spec.growth_scale,
        "freq_scale": spec.freq_scale,
    }


def edit_from_kv(kv):
    if kv.get("kind", "editspec") != "editspec":
        raise ValueError("not an edit spec")
    weights = parse_floats(kv["weights"])
    growth = parse_floats(kv["growth_scale"])
    freq = parse_floats(kv["freq_scale"])
    spec = EditSpec(
        weights,
        growth,
        freq,
        float(kv.get("cluster_threshold", "0.01")),
    )
    if "r" in kv and int(kv["r"]) != spec.r:
        raise ValueError(
            f"edit spec declares r = {kv['r']} but carries {spec.r} entries"
        )
    return spec


def save_edit(path, spec):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(kv_dumps({k: format_value(v) for k, v in edit_to_kv(spec).items()}))


def load_edit(path):
    with open(path, "r", encoding="utf-8") as fh:
        return edit_from_kv(kv_loads(fh.read()))
