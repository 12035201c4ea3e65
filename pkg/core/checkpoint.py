"""
Checkpoint Container
====================

A checkpoint is a zip archive holding one NPY (format 1.0, little-endian
``<f8``, C order) entry per parameter, named ``layer{idx}.{param}.npy``, plus
``manifest.json``::

    {"schema": 1, "topology": {...NetworkConfig...}, "epoch": 3,
     "metrics": {...}, "seed": 0}

Entries are stored uncompressed, in sorted name order, with a fixed
timestamp, so equal parameters always give byte-identical files.

Plain ``.npz`` archives are also accepted by :func:`load_filter_banks` for
analysis and compression: 4-D entries are dense filter banks, and
``NAME.eigen_filters`` / ``NAME.coefficients`` pairs (the output of
:func:`save_scef_banks`) are SCEF layers composed back to dense banks.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import structlog

from .errors import ConfigError, DimensionError, FormatError, ParameterError
from .layers import ScefParams, compose_filters
from .network import Network, NetworkConfig, build_network
from .tensor_core import FilterBank

log = structlog.get_logger(__name__)

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"
_FIXED_TIMESTAMP = (1980, 1, 1, 0, 0, 0)
EIGEN_SUFFIX = ".eigen_filters"
COEFFICIENTS_SUFFIX = ".coefficients"


@dataclass
class Checkpoint:
    """Topology plus the named parameter arrays of a network."""

    config: NetworkConfig
    parameters: dict[str, np.ndarray]
    epoch: int = 0
    metrics: dict = field(default_factory=dict)
    seed: int | None = None

    def network(self) -> Network:
        """Rebuild a live network carrying these parameters."""
        net = build_network(self.config, self.seed or 0)
        net.load_parameters(self.parameters)
        return net

    def manifest(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "topology": self.config.to_dict(),
            "epoch": self.epoch,
            "metrics": self.metrics,
            "seed": self.seed,
        }


def checkpoint_from_network(net: Network, epoch: int = 0, metrics: dict | None = None,
                            seed: int | None = None) -> Checkpoint:
    params = {name: value.copy() for name, value in net.parameters().items()}
    return Checkpoint(net.config, params, epoch, dict(metrics or {}), seed)


# ---------------------------------------------------------------------------
# Writing
# ---------------------------------------------------------------------------

def _npy_bytes(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    data = np.ascontiguousarray(array, dtype="<f8")
    np.lib.format.write_array(buf, data, version=(1, 0), allow_pickle=False)
    return buf.getvalue()


def _write_entry(archive: zipfile.ZipFile, name: str, payload: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_FIXED_TIMESTAMP)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    archive.writestr(info, payload)


def save_checkpoint(path, checkpoint: Checkpoint) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    entries = {f"{name}.npy": _npy_bytes(value) for name, value in checkpoint.parameters.items()}
    entries[MANIFEST_NAME] = json.dumps(checkpoint.manifest(), indent=2, sort_keys=True).encode("utf-8")
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as archive:
        for name in sorted(entries):
            _write_entry(archive, name, entries[name])
    log.debug("checkpoint saved", path=str(path), entries=len(entries), epoch=checkpoint.epoch)
    return path


# ---------------------------------------------------------------------------
# Reading
# ---------------------------------------------------------------------------

def _read_npy(payload: bytes, entry: str) -> np.ndarray:
    try:
        return np.lib.format.read_array(io.BytesIO(payload), allow_pickle=False)
    except (ValueError, EOFError, OSError) as e:
        raise FormatError(f"not a valid NPY entry ({e})", entry) from e


def _open_zip(path: Path) -> zipfile.ZipFile:
    if not path.is_file():
        raise FormatError("no such file", str(path))
    try:
        return zipfile.ZipFile(path)
    except zipfile.BadZipFile as e:
        raise FormatError("not a zip container", str(path)) from e


def load_checkpoint(path) -> Checkpoint:
    """Read and validate a checkpoint written by :func:`save_checkpoint`."""
    path = Path(path)
    with _open_zip(path) as archive:
        names = archive.namelist()
        if MANIFEST_NAME not in names:
            raise FormatError("missing manifest.json", str(path))
        try:
            manifest = json.loads(archive.read(MANIFEST_NAME).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise FormatError(f"manifest is not valid JSON ({e})", MANIFEST_NAME) from e
        if not isinstance(manifest, dict) or manifest.get("schema") != SCHEMA_VERSION:
            raise FormatError(f"unsupported manifest schema (expected {SCHEMA_VERSION})", MANIFEST_NAME)
        try:
            config = NetworkConfig.from_dict(manifest.get("topology"))
        except ConfigError as e:
            raise FormatError(f"topology does not validate: {e}", MANIFEST_NAME) from e

        expected = config.parameter_shapes()
        params = {}
        for name in names:
            if name == MANIFEST_NAME:
                continue
            key = name[:-4] if name.endswith(".npy") else None
            if key not in expected:
                raise FormatError("unexpected entry for this topology", name)
            array = _read_npy(archive.read(name), name)
            if array.shape != expected[key]:
                raise FormatError(f"shape {array.shape} != expected {expected[key]}", name)
            params[key] = array.astype(np.float64, copy=False)
        missing = sorted(set(expected) - set(params))
        if missing:
            raise FormatError("missing entries", f"{missing[0]}.npy")

    return Checkpoint(
        config=config,
        parameters=params,
        epoch=int(manifest.get("epoch", 0)),
        metrics=dict(manifest.get("metrics") or {}),
        seed=manifest.get("seed"),
    )


def load_filter_banks(path) -> list[tuple[str, FilterBank]]:
    """Dense filter banks of every convolution in a weights container.

    Checkpoints yield one bank per conv/SCEF layer (SCEF layers composed),
    named ``layer{idx}``; ``.npz`` archives yield every 4-D entry and every
    composed SCEF pair in archive order.  An empty container is a :class:`FormatError`.
    """
    path = Path(path)
    if path.suffix == ".npz":
        banks = _npz_banks(path)
    else:
        net = load_checkpoint(path).network()
        banks = [(f"layer{idx}", bank) for idx, bank in net.conv_banks()]
    if not banks:
        raise FormatError("container holds no filter banks", str(path))
    return banks


def _npz_entries(path: Path) -> dict[str, np.ndarray]:
    if not path.is_file():
        raise FormatError("no such file", str(path))
    try:
        archive = np.load(path, allow_pickle=False)
    except (ValueError, OSError, zipfile.BadZipFile) as e:
        raise FormatError(f"not a readable .npz archive ({e})", str(path)) from e
    entries = {}
    with archive:
        for name in archive.files:
            try:
                entries[name] = archive[name]
            except (ValueError, OSError) as e:
                raise FormatError(f"unreadable entry ({e})", name) from e
    return entries


def _scef_pair(entries: dict[str, np.ndarray], base: str) -> ScefParams:
    coeff_name = base + COEFFICIENTS_SUFFIX
    if coeff_name not in entries:
        raise FormatError("eigen-filters without coefficients", base + EIGEN_SUFFIX)
    try:
        return ScefParams(entries[base + EIGEN_SUFFIX], entries[coeff_name])
    except (DimensionError, ParameterError) as e:
        raise FormatError(str(e), base + EIGEN_SUFFIX) from e


def _npz_layers(path: Path) -> list[tuple[str, FilterBank | ScefParams]]:
    """Dense banks and ``NAME.eigen_filters`` / ``NAME.coefficients`` pairs in archive order."""
    entries = _npz_entries(path)
    layers = []
    for name, array in entries.items():
        if name.endswith(EIGEN_SUFFIX):
            base = name[: -len(EIGEN_SUFFIX)]
            layers.append((base, _scef_pair(entries, base)))
        elif name.endswith(COEFFICIENTS_SUFFIX):
            if name[: -len(COEFFICIENTS_SUFFIX)] + EIGEN_SUFFIX not in entries:
                raise FormatError("coefficients without eigen-filters", name)
        elif array.ndim == 4:
            try:
                layers.append((name, FilterBank(array)))
            except DimensionError as e:
                raise FormatError(str(e), name) from e
    return layers


def _npz_banks(path: Path) -> list[tuple[str, FilterBank]]:
    return [
        (name, compose_filters(item) if isinstance(item, ScefParams) else item)
        for name, item in _npz_layers(path)
    ]


def load_scef_banks(path) -> list[tuple[str, ScefParams]]:
    """SCEF layers stored as ``NAME.eigen_filters`` / ``NAME.coefficients`` in an ``.npz``."""
    return [(name, item) for name, item in _npz_layers(Path(path)) if isinstance(item, ScefParams)]


def save_filter_banks(path, banks: dict[str, np.ndarray]) -> Path:
    """Write dense banks as a plain ``.npz`` archive (the analysis input format)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, **{name: np.asarray(bank, dtype=np.float64) for name, bank in banks.items()})
    return path


def save_scef_banks(path, layers: dict[str, ScefParams]) -> Path:
    """Write SCEF layers to ``.npz`` as ``NAME.eigen_filters`` / ``NAME.coefficients`` pairs."""
    arrays = {}
    for name, params in layers.items():
        arrays[name + EIGEN_SUFFIX] = params.eigen_filters
        arrays[name + COEFFICIENTS_SUFFIX] = params.coefficients
    return save_filter_banks(path, arrays)


__all__ = [
    "SCHEMA_VERSION",
    "Checkpoint",
    "checkpoint_from_network",
    "save_checkpoint",
    "load_checkpoint",
    "load_filter_banks",
    "load_scef_banks",
    "save_filter_banks",
    "save_scef_banks",
]
