"""
Tests for the exact oracles
"""

from dataclasses import replace

import numpy as np
import pytest

from src.errors import ExactLimitError
from src.exact import (
    ExactLimits,
    exact_ml,
    exact_ml_permutations,
    exact_mlufl,
    exact_mssc,
    exact_ufl,
    ml_latency,
    mssc_cost,
)
from src.generators import Family, GenSpec, generate
from src.instance import evaluate
from src.seeding import make_rng


def random_metric(size: int, seed: int) -> np.ndarray:
    points = make_rng(seed).uniform(0, 10, size=(size, 2))
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=2))


class TestExactMlufl:
    """Test the route search"""

    def test_desk1(self, desk1_instance):
        result = exact_mlufl(desk1_instance)
        assert result.value == 8
        assert result.solution.routes == [[0, 1]]

    @pytest.mark.parametrize("seed", range(5))
    def test_pruning_matches_full_enumeration(self, seed):
        inst = generate(GenSpec(family=Family.EUCLIDEAN, n=4, m=3), seed)
        pruned = exact_mlufl(inst)
        full = exact_mlufl(inst, full_enumeration=True)
        assert pruned.value == pytest.approx(full.value)
        assert pruned.explored <= full.explored
        assert evaluate(inst, pruned.solution).total == pytest.approx(pruned.value)

    def test_route_budget_respected(self, desk1_instance):
        result = exact_mlufl(replace(desk1_instance, route_budget=1.0))
        assert result.solution.routes == [[0]]
        assert result.value == 17

    def test_several_routes_unsupported(self, desk1_instance):
        with pytest.raises(ExactLimitError) as exc:
            exact_mlufl(replace(desk1_instance, route_count=2))
        assert exc.value.error_code == "UNSUPPORTED"

    def test_size_limit(self, desk1_instance):
        with pytest.raises(ExactLimitError) as exc:
            exact_mlufl(desk1_instance, ExactLimits(mlufl_facilities=1))
        assert exc.value.error_code == "OVER_LIMIT"


class TestExactMl:
    """Test the latency dynamic program"""

    def test_desk2(self, desk2):
        assert exact_ml(desk2, 2) == (3.0, [0, 1])

    def test_group_covered_by_first_member(self, desk2):
        assert exact_ml(desk2, 2, groups=[[0, 1]]) == (1.0, [0])

    def test_latency_of_order(self, desk2):
        assert ml_latency(desk2, 2, [1, 0]) == 5.0
        assert ml_latency(desk2, 2, [0]) == np.inf

    @pytest.mark.parametrize("seed", range(4))
    def test_dp_matches_permutations(self, seed):
        metric = random_metric(6, seed)
        value, order = exact_ml(metric, 5)
        assert value == pytest.approx(exact_ml_permutations(metric, 5)[0])
        assert ml_latency(metric, 5, order) == pytest.approx(value)

    def test_weighted_groups_match_permutations(self):
        metric = random_metric(6, 9)
        groups = [[0, 1], [2], [3, 4]]
        weights = [1.0, 3.0, 0.5]
        value, order = exact_ml(metric, 5, groups, weights)
        assert value == pytest.approx(exact_ml_permutations(metric, 5, groups, weights)[0])
        assert ml_latency(metric, 5, order, groups, weights) == pytest.approx(value)


class TestExactMssc:
    """Test min-sum set cover"""

    def test_cost(self):
        assert mssc_cost([{0, 1}, {2}], [0, 1]) == 4.0
        assert mssc_cost([{0, 1}, {2}], [1, 0]) == 5.0
        assert mssc_cost([{0, 1}, {2}], [0]) == np.inf

    def test_optimum(self):
        assert exact_mssc([{0, 1}, {2}]) == (4.0, [0, 1])

    def test_redundant_set_goes_last(self):
        value, order = exact_mssc([{0}, {0, 1, 2}, {1}])
        assert value == 3.0
        assert order[0] == 1
        assert sorted(order) == [0, 1, 2]

    def test_limit(self):
        with pytest.raises(ExactLimitError):
            exact_mssc([{0}, {1}], ExactLimits(mssc_sets=1))


class TestExactUfl:
    """Test subset enumeration"""

    def test_desk1(self, desk1_instance):
        result = exact_ufl(desk1_instance)
        assert result.value == 5.0
        assert result.open_set == [0, 1]
        assert result.assignment == [0, 1]

    def test_cardinality(self, desk1_instance):
        result = exact_ufl(desk1_instance, cardinality=1)
        assert result.value == 10.0
        assert result.open_set == [1]
        assert result.assignment == [1, 1]


@pytest.mark.slow
class TestExactMlAgreement:
    """Test the DP against brute force on many random metrics"""

    def test_two_hundred_metrics(self):
        for seed in range(200):
            metric = random_metric(8, 1000 + seed)
            value, order = exact_ml(metric, 7)
            assert value == pytest.approx(exact_ml_permutations(metric, 7)[0], abs=1e-9)
            assert ml_latency(metric, 7, order) == pytest.approx(value)
