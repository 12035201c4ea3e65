"""Tests for core.schedules: rank decay and default hyperparameters."""

import pytest

from core.errors import ParameterError
from core.schedules import RankSchedule, default_hyperparams, normalize_decay_kind, rank_at_depth

pytestmark = pytest.mark.unit


class TestLinearDecay:
    @pytest.mark.parametrize("depth,expected", [(0, 9), (4, 5), (8, 1)])
    def test_evaluates_formula(self, depth, expected):
        assert rank_at_depth(RankSchedule("linear", 9, 0, 8), depth) == expected

    def test_three_layer_network(self):
        sched = RankSchedule("linear", 9, 0, 2)
        assert [rank_at_depth(sched, l) for l in range(3)] == [9, 5, 1]

    def test_relative_depth(self):
        sched = RankSchedule("linear", 9, 3, 5)
        assert [rank_at_depth(sched, l) for l in range(3, 6)] == [9, 5, 1]

    def test_single_layer_is_full_rank(self):
        assert rank_at_depth(RankSchedule("linear", 25, 2, 2), 2) == 25


class TestLogarithmicDecay:
    @pytest.mark.parametrize("rel,expected", [(1, 9), (2, 8), (4, 4), (16, 2)])
    def test_evaluates_formula(self, rel, expected):
        assert rank_at_depth(RankSchedule("logarithmic", 9, 0, 20), rel - 1) == expected

    def test_log_alias(self):
        assert normalize_decay_kind("log") == "logarithmic"
        assert RankSchedule("log", 9, 0, 3).kind == "logarithmic"


class TestScheduleProperties:
    @pytest.mark.parametrize("kind", ["none", "linear", "logarithmic"])
    @pytest.mark.parametrize("K", [1, 4, 9, 25])
    @pytest.mark.parametrize("span", [0, 1, 3, 10, 40])
    def test_non_increasing_and_in_range(self, kind, K, span):
        sched = RankSchedule(kind, K, 2, 2 + span)
        ranks = [rank_at_depth(sched, l) for l in range(2, 3 + span)]
        assert all(1 <= r <= K for r in ranks)
        assert all(b <= a for a, b in zip(ranks, ranks[1:]))

    @pytest.mark.parametrize("K", [4, 9, 25, 49])
    def test_linear_endpoints(self, K):
        sched = RankSchedule("linear", K, 0, 6)
        assert rank_at_depth(sched, 0) == K
        assert rank_at_depth(sched, 6) == 1

    def test_none_is_full_rank(self):
        assert rank_at_depth(RankSchedule("none", 9, 0, 4), 3) == 9

    def test_depth_out_of_range(self):
        with pytest.raises(ParameterError):
            rank_at_depth(RankSchedule("linear", 9, 0, 4), 5)

    def test_invalid_schedules(self):
        with pytest.raises(ParameterError):
            RankSchedule("cubic", 9, 0, 4)
        with pytest.raises(ParameterError):
            RankSchedule("linear", 9, 4, 0)


class TestDefaultHyperparams:
    def test_lambda1_scales_with_rank(self):
        hp = default_hyperparams([9, 1])
        assert hp.lambda1_per_layer[0] == pytest.approx(0.0009)
        assert hp.lambda1_per_layer[1] == pytest.approx(0.0001)
        assert hp.lambda2 == 0.0001
        assert hp.gamma == 0.3

    def test_gamma_for_any_input(self):
        assert default_hyperparams([]).gamma == 0.3

    def test_rank_must_be_positive(self):
        with pytest.raises(ParameterError):
            default_hyperparams([3, 0])
