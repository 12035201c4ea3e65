"""Tests for core.complexity: parameter and FLOP counts, network summaries."""

import json
from pathlib import Path

import pytest

from core.complexity import count_flops, count_params, layer_complexity, network_summary
from core.errors import ParameterError
from core.network import LayerSpec, NetworkConfig, tinynet_config

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

pytestmark = pytest.mark.unit


class TestGoldenNumbers:
    def test_conv2d_params(self):
        assert count_params("conv2d", 128, 128, 3) == 147456

    @pytest.mark.parametrize("r,expected", [(8, 140288), (4, 70144)])
    def test_scef_params(self, r, expected):
        assert count_params("scef", 128, 128, 3, r) == expected

    def test_conv2d_flops(self):
        assert count_flops("conv2d", 100, 100, 1, 128, 128, 3) == 1_474_560_000

    @pytest.mark.parametrize("r,expected", [(8, 1_402_880_000), (4, 701_440_000)])
    def test_scef_flops(self, r, expected):
        assert count_flops("scef", 100, 100, 1, 128, 128, 3, r) == expected

    def test_trivial_conv(self):
        assert count_params("conv2d", 1, 1, 1) == 1

    def test_strided_positions(self):
        cost = layer_complexity("conv2d", 4, 4, 2, 1, 1, 1)
        assert cost.t == 4
        assert cost.flops == 4


class TestCountingRules:
    def test_breakdown(self):
        cost = layer_complexity("scef", 10, 10, 1, 16, 32, 3, r=4)
        assert cost.n_u == 16 * 9 * 4
        assert cost.n_a == 16 * 32 * 4
        assert cost.params == cost.n_u + cost.n_a

    @pytest.mark.parametrize("c_in,c_out,h", [(3, 16, 3), (64, 64, 5), (5, 2, 7)])
    def test_full_rank_without_trainable_basis_equals_conv(self, c_in, c_out, h):
        K = h * h
        assert count_params("scef", c_in, c_out, h, K) == count_params("conv2d", c_in, c_out, h)
        assert count_params("scef", c_in, c_out, h, K, frozen=True) == c_in * c_out * K

    def test_frozen_drops_basis(self):
        assert count_params("scef", 8, 8, 3, 2, frozen=True) == 8 * 8 * 2

    def test_strictly_increasing_in_rank(self):
        params = [count_params("scef", 8, 16, 3, r) for r in range(1, 9)]
        flops = [count_flops("scef", 12, 12, 1, 8, 16, 3, r) for r in range(1, 10)]
        assert all(b > a for a, b in zip(params, params[1:]))
        assert all(b > a for a, b in zip(flops, flops[1:]))

    @pytest.mark.parametrize("c_out", [1, 4, 16, 128])
    @pytest.mark.parametrize("h", [1, 3, 5])
    def test_flop_inequality(self, c_out, h):
        K = h * h
        for r in range(1, K + 1):
            scef = count_flops("scef", 8, 8, 1, 4, c_out, h, r)
            conv = count_flops("conv2d", 8, 8, 1, 4, c_out, h)
            assert (scef < conv) == (r * (K + c_out) < K * c_out)

    def test_mult_add_doubles(self):
        assert count_flops("conv2d", 8, 8, 1, 2, 3, 3, mult_add=True) == 2 * count_flops("conv2d", 8, 8, 1, 2, 3, 3)

    def test_dense_and_pool(self):
        assert count_params("dense", 64, 10) == 650
        assert count_flops("dense", 1, 1, 1, 64, 10) == 640
        assert count_params("pool", 1, 1) == 0

    @pytest.mark.parametrize("dims", [(0, 4, 3), (4, -1, 3), (4, 4, 0)])
    def test_non_positive_dims(self, dims):
        with pytest.raises(ParameterError):
            count_params("conv2d", *dims)

    def test_bad_rank_and_kind(self):
        with pytest.raises(ParameterError):
            count_params("scef", 4, 4, 3, 10)
        with pytest.raises(ParameterError):
            count_params("scef", 4, 4, 3, None)
        with pytest.raises(ParameterError):
            count_params("lstm", 4, 4, 3)

    def test_no_positions(self):
        with pytest.raises(ParameterError):
            count_flops("conv2d", 1, 1, 2, 1, 1, 1)


class TestNetworkSummary:
    def test_worked_example_config(self):
        config = NetworkConfig.from_dict(json.loads((CONFIG_DIR / "complexity_example.json").read_text()))
        summary = network_summary(config)
        assert [row.cost.params for row in summary.rows] == [147456, 140288, 70144]
        assert [row.cost.flops for row in summary.rows] == [1_474_560_000, 1_402_880_000, 701_440_000]
        assert [row.rank for row in summary.rows] == [None, 8, 4]

    def test_single_layer(self):
        config = NetworkConfig(
            input_shape=(3, 20, 20),
            layers=(LayerSpec("scef", c_in=3, c_out=8, h=5, stride=2, rank=6),),
        )
        row = network_summary(config).rows[0]
        assert row.cost.params == count_params("scef", 3, 8, 5, 6)
        assert row.cost.flops == count_flops("scef", 20, 20, 2, 3, 8, 5, 6)

    def test_totals_are_column_sums(self):
        summary = network_summary(tinynet_config())
        assert summary.total_params == sum(row.cost.params for row in summary.rows)
        assert summary.total_flops == sum(row.cost.flops for row in summary.rows)
        payload = summary.to_dict()
        assert payload["schema"] == 1
        assert payload["totals"]["params"] == summary.total_params

    def test_rows_follow_spatial_shapes(self):
        summary = network_summary(tinynet_config(image_size=16))
        assert [row.input_hw for row in summary.rows[:3]] == [(16, 16), (16, 16), (8, 8)]

    def test_tinynet_scef_is_smaller(self):
        scef = network_summary(tinynet_config(scef=True))
        conv = network_summary(tinynet_config(scef=False))
        assert scef.total_params < conv.total_params
        for s_row, c_row in zip(scef.rows, conv.rows):
            if s_row.kind == "scef" and s_row.rank <= (s_row.c_out * 9) // (s_row.c_out + 9):
                assert s_row.cost.params < c_row.cost.params

    def test_scheduled_ranks_and_frozen_flag(self):
        rows = network_summary(tinynet_config()).rows
        assert [row.rank for row in rows[:3]] == [9, 5, 1]
        assert rows[0].frozen and not rows[1].frozen
