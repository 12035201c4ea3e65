"""Tests for core.checkpoint: the zip/NPY container and filter-bank loading."""

import json
import zipfile

import numpy as np
import pytest

from core.checkpoint import (
    MANIFEST_NAME,
    checkpoint_from_network,
    load_checkpoint,
    load_filter_banks,
    load_scef_banks,
    save_checkpoint,
    save_filter_banks,
    save_scef_banks,
)
from core.errors import FormatError
from core.layers import compose_filters, init_scef
from core.network import build_network

pytestmark = pytest.mark.unit


@pytest.fixture
def tiny_checkpoint(tiny_config):
    net = build_network(tiny_config, seed=4)
    return checkpoint_from_network(net, epoch=2, metrics={"val_acc": 0.5}, seed=4)


def write_zip(path, entries):
    with zipfile.ZipFile(path, "w") as archive:
        for name, payload in entries.items():
            archive.writestr(name, payload)
    return path


def entries_of(path):
    with zipfile.ZipFile(path) as archive:
        return {name: archive.read(name) for name in archive.namelist()}


class TestRoundTrip:
    def test_parameters_and_metadata(self, tiny_checkpoint, tmp_path):
        path = save_checkpoint(tmp_path / "a.ckpt", tiny_checkpoint)
        loaded = load_checkpoint(path)
        assert loaded.config == tiny_checkpoint.config
        assert loaded.epoch == 2
        assert loaded.seed == 4
        assert loaded.metrics == {"val_acc": 0.5}
        assert loaded.parameters.keys() == tiny_checkpoint.parameters.keys()
        for name, value in tiny_checkpoint.parameters.items():
            assert loaded.parameters[name].tobytes() == value.tobytes()

    def test_rebuilt_network_is_identical(self, tiny_checkpoint, tmp_path, rng):
        path = save_checkpoint(tmp_path / "a.ckpt", tiny_checkpoint)
        x = rng.standard_normal((3, 1, 8, 8))
        np.testing.assert_array_equal(load_checkpoint(path).network().forward(x),
                                      tiny_checkpoint.network().forward(x))

    def test_resave_is_byte_identical(self, tiny_checkpoint, tmp_path):
        first = save_checkpoint(tmp_path / "a.ckpt", tiny_checkpoint)
        second = save_checkpoint(tmp_path / "b.ckpt", load_checkpoint(first))
        assert first.read_bytes() == second.read_bytes()

    def test_container_layout(self, tiny_checkpoint, tmp_path):
        path = save_checkpoint(tmp_path / "sub" / "a.ckpt", tiny_checkpoint)
        with zipfile.ZipFile(path) as archive:
            infos = archive.infolist()
            names = [info.filename for info in infos]
            assert names == sorted(names)
            assert MANIFEST_NAME in names
            assert all(info.compress_type == zipfile.ZIP_STORED for info in infos)
            assert all(info.date_time == (1980, 1, 1, 0, 0, 0) for info in infos)
            payload = archive.read("layer0.coefficients.npy")
            manifest = json.loads(archive.read(MANIFEST_NAME))
        assert payload.startswith(b"\x93NUMPY\x01\x00")
        assert b"'descr': '<f8'" in payload
        assert manifest["schema"] == 1
        assert manifest["topology"]["name"] == "tiny"


class TestMalformedContainers:
    def test_missing_file(self, tmp_path):
        with pytest.raises(FormatError):
            load_checkpoint(tmp_path / "nope.ckpt")

    def test_not_a_zip(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"not a zip")
        with pytest.raises(FormatError):
            load_checkpoint(path)

    def test_missing_manifest(self, tiny_checkpoint, tmp_path):
        entries = entries_of(save_checkpoint(tmp_path / "a.ckpt", tiny_checkpoint))
        del entries[MANIFEST_NAME]
        with pytest.raises(FormatError, match="manifest"):
            load_checkpoint(write_zip(tmp_path / "b.ckpt", entries))

    def test_invalid_manifest_json(self, tiny_checkpoint, tmp_path):
        entries = entries_of(save_checkpoint(tmp_path / "a.ckpt", tiny_checkpoint))
        entries[MANIFEST_NAME] = b"{broken"
        with pytest.raises(FormatError) as info:
            load_checkpoint(write_zip(tmp_path / "b.ckpt", entries))
        assert info.value.entry == MANIFEST_NAME

    def test_unknown_schema(self, tiny_checkpoint, tmp_path):
        entries = entries_of(save_checkpoint(tmp_path / "a.ckpt", tiny_checkpoint))
        manifest = json.loads(entries[MANIFEST_NAME])
        manifest["schema"] = 2
        entries[MANIFEST_NAME] = json.dumps(manifest).encode()
        with pytest.raises(FormatError, match="schema"):
            load_checkpoint(write_zip(tmp_path / "b.ckpt", entries))

    def test_invalid_topology(self, tiny_checkpoint, tmp_path):
        entries = entries_of(save_checkpoint(tmp_path / "a.ckpt", tiny_checkpoint))
        manifest = json.loads(entries[MANIFEST_NAME])
        manifest["topology"]["layers"][1]["c_in"] = 9
        entries[MANIFEST_NAME] = json.dumps(manifest).encode()
        with pytest.raises(FormatError, match="topology"):
            load_checkpoint(write_zip(tmp_path / "b.ckpt", entries))

    def test_unexpected_entry(self, tiny_checkpoint, tmp_path):
        entries = entries_of(save_checkpoint(tmp_path / "a.ckpt", tiny_checkpoint))
        entries["extra.npy"] = entries["layer3.bias.npy"]
        with pytest.raises(FormatError) as info:
            load_checkpoint(write_zip(tmp_path / "b.ckpt", entries))
        assert info.value.entry == "extra.npy"

    def test_missing_entry(self, tiny_checkpoint, tmp_path):
        entries = entries_of(save_checkpoint(tmp_path / "a.ckpt", tiny_checkpoint))
        del entries["layer3.weight.npy"]
        with pytest.raises(FormatError) as info:
            load_checkpoint(write_zip(tmp_path / "b.ckpt", entries))
        assert info.value.entry == "layer3.weight.npy"

    def test_wrong_shape(self, tiny_checkpoint, tmp_path):
        entries = entries_of(save_checkpoint(tmp_path / "a.ckpt", tiny_checkpoint))
        entries["layer3.bias.npy"] = entries["layer1.coefficients.npy"]
        with pytest.raises(FormatError, match="shape"):
            load_checkpoint(write_zip(tmp_path / "b.ckpt", entries))

    def test_corrupt_npy(self, tiny_checkpoint, tmp_path):
        entries = entries_of(save_checkpoint(tmp_path / "a.ckpt", tiny_checkpoint))
        entries["layer3.bias.npy"] = b"\x93NUMPY garbage"
        with pytest.raises(FormatError) as info:
            load_checkpoint(write_zip(tmp_path / "b.ckpt", entries))
        assert info.value.entry == "layer3.bias.npy"


class TestFilterBanks:
    def test_checkpoint_banks_are_composed(self, tiny_checkpoint, tmp_path):
        path = save_checkpoint(tmp_path / "a.ckpt", tiny_checkpoint)
        banks = load_filter_banks(path)
        assert [name for name, _ in banks] == ["layer0", "layer1"]
        expected = dict(tiny_checkpoint.network().conv_banks())
        np.testing.assert_array_equal(banks[1][1].weights, expected[1].weights)

    def test_npz_keeps_four_dimensional_entries(self, rng, tmp_path):
        path = save_filter_banks(tmp_path / "w.npz", {
            "conv": rng.standard_normal((4, 2, 3, 3)),
            "dense": rng.standard_normal((3, 5)),
        })
        banks = load_filter_banks(path)
        assert [name for name, _ in banks] == ["conv"]
        assert banks[0][1].weights.shape == (4, 2, 3, 3)

    def test_empty_npz(self, tmp_path):
        with pytest.raises(FormatError, match="no filter banks"):
            load_filter_banks(save_filter_banks(tmp_path / "empty.npz", {}))

    def test_unreadable_npz(self, tmp_path):
        path = tmp_path / "bad.npz"
        path.write_bytes(b"garbage")
        with pytest.raises(FormatError):
            load_filter_banks(path)


class TestScefArchives:
    def test_pairs_compose_back_to_dense_banks(self, tmp_path):
        params = init_scef(2, 8, 3, 2, seed=1)
        path = save_scef_banks(tmp_path / "c.npz", {"a": params})
        banks = load_filter_banks(path)
        assert [name for name, _ in banks] == ["a"]
        np.testing.assert_allclose(banks[0][1].weights, compose_filters(params).weights)

    def test_pairs_load_as_scef_params(self, tmp_path):
        params = init_scef(3, 4, 3, 5, seed=2)
        path = save_scef_banks(tmp_path / "c.npz", {"b": params})
        [(name, loaded)] = load_scef_banks(path)
        assert name == "b"
        np.testing.assert_array_equal(loaded.coefficients, params.coefficients)

    def test_dense_and_scef_entries_mix(self, rng, tmp_path):
        params = init_scef(2, 8, 3, 2, seed=1)
        path = save_filter_banks(tmp_path / "m.npz", {
            "dense": rng.standard_normal((4, 2, 3, 3)),
            "s.eigen_filters": params.eigen_filters,
            "s.coefficients": params.coefficients,
        })
        assert [name for name, _ in load_filter_banks(path)] == ["dense", "s"]

    @pytest.mark.parametrize("entry", ["a.eigen_filters", "a.coefficients"])
    def test_unpaired_entry(self, tmp_path, entry):
        params = init_scef(2, 8, 3, 2, seed=1)
        arrays = {"a.eigen_filters": params.eigen_filters, "a.coefficients": params.coefficients}
        path = save_filter_banks(tmp_path / "u.npz", {entry: arrays[entry]})
        with pytest.raises(FormatError) as info:
            load_filter_banks(path)
        assert info.value.entry == entry

    def test_mismatched_pair(self, rng, tmp_path):
        path = save_filter_banks(tmp_path / "x.npz", {
            "a.eigen_filters": init_scef(2, 8, 3, 2, seed=1).eigen_filters,
            "a.coefficients": rng.standard_normal((3, 8, 2)),
        })
        with pytest.raises(FormatError):
            load_filter_banks(path)
