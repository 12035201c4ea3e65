"""Tests for core.network: topology validation, rank assignment and the layer stack."""

import numpy as np
import pytest

from conftest import tiny_network_dict
from core.errors import ConfigError, DimensionError
from core.layers import ScefLayer
from core.network import LayerSpec, NetworkConfig, build_network, resolve_ranks, tinynet_config

pytestmark = pytest.mark.unit


class TestRankAssignment:
    def test_tinynet_linear_ranks(self):
        layers = tinynet_config().resolved_layers()
        assert [spec.rank for spec in layers[:3]] == [9, 5, 1]
        assert [spec.frozen for spec in layers[:3]] == [True, False, False]

    def test_logarithmic_ranks(self):
        layers = tinynet_config(rank_decay="log").resolved_layers()
        assert [spec.rank for spec in layers[:3]] == [9, 8, 5]

    def test_explicit_rank_wins(self):
        data = tiny_network_dict()
        data["layers"][1]["rank"] = 4
        layers = NetworkConfig.from_dict(data).resolved_layers()
        assert [layers[0].rank, layers[1].rank] == [9, 4]
        assert resolve_ranks(NetworkConfig.from_dict(data)) == {0: 9, 1: 4}

    def test_no_decay_keeps_full_rank(self):
        layers = NetworkConfig.from_dict(tiny_network_dict(rank_decay="none")).resolved_layers()
        assert [layers[0].rank, layers[1].rank] == [9, 9]
        assert layers[0].frozen and layers[1].frozen

    def test_freeze_full_rank_off(self):
        data = tiny_network_dict()
        data["freeze_full_rank"] = False
        assert not NetworkConfig.from_dict(data).resolved_layers()[0].frozen

    def test_empty_scef_set_is_plain_cnn(self, tiny_conv_config):
        net = build_network(tiny_conv_config, seed=0)
        assert net.scef_layers() == []
        assert [spec.kind for spec in net.config.layers] == ["conv2d", "conv2d", "pool", "dense"]

    def test_listed_subset(self):
        config = NetworkConfig.from_dict(tiny_network_dict(scef_set=[1]))
        assert config.scef_indices == (1,)
        assert [spec.kind for spec in config.resolved_layers()[:2]] == ["conv2d", "scef"]

    def test_pointwise_convolutions_are_not_eligible(self):
        data = tiny_network_dict()
        data["layers"].insert(1, {"kind": "conv2d", "c_in": 4, "c_out": 4, "h": 1})
        data["layers"][2]["c_in"] = 4
        config = NetworkConfig.from_dict(data)
        assert config.eligible_indices == (0, 2)
        assert config.resolved_layers()[1].kind == "conv2d"


class TestValidation:
    def test_scef_on_pointwise_layer(self):
        data = tiny_network_dict(scef_set=[0])
        data["layers"][0]["h"] = 1
        with pytest.raises(ConfigError) as info:
            NetworkConfig.from_dict(data)
        assert info.value.layer_index == 0

    def test_channel_mismatch_names_layer(self):
        data = tiny_network_dict()
        data["layers"][1]["c_in"] = 5
        with pytest.raises(ConfigError) as info:
            NetworkConfig.from_dict(data)
        assert info.value.layer_index == 1
        assert str(info.value).startswith("layer 1: ")

    def test_dense_feature_mismatch(self):
        data = tiny_network_dict()
        data["layers"][3]["c_in"] = 7
        with pytest.raises(ConfigError) as info:
            NetworkConfig.from_dict(data)
        assert info.value.layer_index == 3

    def test_unknown_keys(self):
        data = tiny_network_dict()
        data["dropout"] = 0.5
        with pytest.raises(ConfigError):
            NetworkConfig.from_dict(data)
        data = tiny_network_dict()
        data["layers"][0]["dilation"] = 2
        with pytest.raises(ConfigError):
            NetworkConfig.from_dict(data)

    def test_missing_kind(self):
        data = tiny_network_dict()
        del data["layers"][0]["kind"]
        with pytest.raises(ConfigError):
            NetworkConfig.from_dict(data)

    def test_even_filter_size(self):
        data = tiny_network_dict()
        data["layers"][0]["h"] = 2
        with pytest.raises(ConfigError):
            NetworkConfig.from_dict(data)

    def test_rank_above_k(self):
        data = tiny_network_dict()
        data["layers"][0]["rank"] = 10
        with pytest.raises(ConfigError):
            NetworkConfig.from_dict(data)

    def test_conv_after_dense(self):
        config = {
            "input_shape": [1, 4, 4],
            "layers": [
                {"kind": "dense", "c_in": 16, "c_out": 4},
                {"kind": "conv2d", "c_in": 4, "c_out": 2, "h": 1},
            ],
        }
        with pytest.raises(ConfigError) as info:
            NetworkConfig.from_dict(config)
        assert info.value.layer_index == 1

    def test_bad_enums(self):
        with pytest.raises(ConfigError):
            NetworkConfig.from_dict(tiny_network_dict(rank_decay="cubic"))
        with pytest.raises(ConfigError):
            NetworkConfig.from_dict(tiny_network_dict(activation="tanh"))
        with pytest.raises(ConfigError):
            NetworkConfig.from_dict(tiny_network_dict(scef_set="some"))

    def test_not_an_object(self):
        with pytest.raises(ConfigError):
            NetworkConfig.from_dict([1, 2])

    def test_dict_round_trip(self, tiny_config):
        assert NetworkConfig.from_dict(tiny_config.to_dict()) == tiny_config

    def test_spatial_shapes(self, tiny_config):
        assert tiny_config.shapes == ((4, 8, 8), (6, 4, 4), (6, 1, 1), (3, 1, 1))
        assert tiny_config.input_shape_of(1) == (4, 8, 8)

    def test_max_pool(self):
        config = NetworkConfig(
            input_shape=(2, 8, 8),
            layers=(
                LayerSpec("conv2d", c_in=2, c_out=3, h=3),
                LayerSpec("pool", pool="max", size=2),
                LayerSpec("dense", c_in=48, c_out=2),
            ),
        )
        out = build_network(config, seed=0).forward(np.ones((1, 2, 8, 8)))
        assert out.shape == (1, 2)


class TestNetwork:
    def test_same_seed_same_parameters(self, tiny_config):
        a = build_network(tiny_config, seed=5).parameters()
        b = build_network(tiny_config, seed=5).parameters()
        assert a.keys() == b.keys()
        for name in a:
            assert a[name].tobytes() == b[name].tobytes()

    def test_different_seed(self, tiny_config):
        a = build_network(tiny_config, seed=5).parameters()
        b = build_network(tiny_config, seed=6).parameters()
        assert not np.array_equal(a["layer1.coefficients"], b["layer1.coefficients"])

    def test_parameter_names_follow_shapes(self, tiny_config):
        net = build_network(tiny_config, seed=0)
        shapes = {name: value.shape for name, value in net.parameters().items()}
        assert shapes == tiny_config.parameter_shapes()
        assert shapes["layer0.eigen_filters"] == (1, 9, 3, 3)
        assert shapes["layer1.coefficients"] == (4, 6, 1)

    def test_frozen_layers_are_not_trainable(self, tiny_config):
        net = build_network(tiny_config, seed=0)
        assert "layer0.eigen_filters" not in net.trainable()
        assert "layer1.eigen_filters" in net.trainable()
        assert net.trainable_count() == 36 + 36 + 24 + 21

    def test_forward_shape(self, tiny_config, rng):
        out = build_network(tiny_config, seed=0).forward(rng.standard_normal((5, 1, 8, 8)))
        assert out.shape == (5, 3)

    def test_forward_rejects_wrong_input(self, tiny_config):
        with pytest.raises(DimensionError):
            build_network(tiny_config, seed=0).forward(np.zeros((1, 2, 8, 8)))

    def test_load_parameters(self, tiny_config):
        source = build_network(tiny_config, seed=1)
        target = build_network(tiny_config, seed=2)
        target.load_parameters(source.parameters())
        for name, value in source.parameters().items():
            np.testing.assert_array_equal(target.parameters()[name], value)

    def test_load_parameters_mismatch(self, tiny_config, tiny_conv_config):
        target = build_network(tiny_config, seed=0)
        with pytest.raises(DimensionError):
            target.load_parameters(build_network(tiny_conv_config, seed=0).parameters())
        values = target.parameters()
        values["layer3.bias"] = np.zeros(4)
        with pytest.raises(DimensionError):
            target.load_parameters(values)

    def test_conv_banks_compose_scef_layers(self, tiny_config):
        net = build_network(tiny_config, seed=0)
        banks = dict(net.conv_banks())
        assert sorted(banks) == [0, 1]
        assert banks[1].weights.shape == (6, 4, 3, 3)
        assert all(isinstance(layer, ScefLayer) for _, layer in net.scef_layers())

    def test_whole_network_gradients(self, rng, gradient_check):
        config = NetworkConfig.from_dict(tiny_network_dict(activation="none"))
        net = build_network(config, seed=3)
        x = rng.standard_normal((2, 1, 8, 8))
        upstream = rng.standard_normal((2, 3))

        def loss():
            return float(np.sum(net.forward(x) * upstream))

        loss()
        net.backward(upstream)
        grads = {name: value.copy() for name, value in net.gradients().items()}
        params = net.parameters()
        for name in net.trainable():
            gradient_check(loss, params[name], grads[name])
        assert not np.any(grads["layer0.eigen_filters"])
