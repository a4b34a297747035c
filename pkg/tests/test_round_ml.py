"""
Tests for minimum-latency rounding from the edge LP and the path LP
"""

import math

import numpy as np
import pytest

from src.colgen import FractionalLatency, metric_timescale, solve_ml_lp1, solve_ml_lp2_colgen
from src.errors import RoundingError
from src.generators import Family, GenSpec, generate
from src.relaxations import TimeScale
from src.round_ml import AlphaPointTable, round_ml_lp1, round_ml_lp2, systematic_sample
from src.seeding import make_rng

SINGLE = np.array([[0.0, 1.0], [1.0, 0.0]])


@pytest.fixture
def desk2_integral(desk2) -> FractionalLatency:
    return FractionalLatency.from_order(desk2, 2, [0, 1], TimeScale.full(4))


class TestAlphaPoints:
    """Test alpha-point lookups"""

    def test_integral_order(self, desk2_integral):
        table = AlphaPointTable(desk2_integral)
        assert table.tau(0, 0.5) == 1.0
        assert table.tau(1, 0.5) == 2.0
        assert table.ready(1.0, 0.5) == [0]
        assert table.ready(2.0, 0.5) == [0, 1]

    def test_monotone_in_alpha(self, desk2):
        _, frac = solve_ml_lp1(desk2, 2, metric_timescale(desk2, 2, 0.5))
        table = AlphaPointTable(frac)
        for v in frac.clients:
            points = [table.tau(v, a) for a in (0.1, 0.3, 0.5, 0.7, 0.9, 1.0)]
            assert points == sorted(points)


class TestRoundMlLp1:
    """Test nested-tour rounding"""

    def test_integral_point_det(self, desk2, desk2_integral):
        order, report = round_ml_lp1(desk2, 2, desk2_integral, mode="det")
        assert order == [0, 1]
        assert report.latency == 3.0
        assert report.violations == []

    def test_desk2_lp_det(self, desk2):
        _, frac = solve_ml_lp1(desk2, 2, metric_timescale(desk2, 2, 0.5))
        order, report = round_ml_lp1(desk2, 2, frac, mode="det")
        assert sorted(order) == [0, 1]
        assert report.nested
        assert report.violations == []

    def test_single_client(self):
        _, frac = solve_ml_lp1(SINGLE, 1, metric_timescale(SINGLE, 1))
        order, report = round_ml_lp1(SINGLE, 1, frac, mode="det")
        assert order == [0]
        assert report.latency == 1.0
        assert report.client_bound == {0: 32.0}

    @pytest.mark.parametrize("seed", range(5))
    def test_random_mode(self, desk2, seed):
        _, frac = solve_ml_lp1(desk2, 2, metric_timescale(desk2, 2, 0.5))
        order, report = round_ml_lp1(desk2, 2, frac, mode="random", seed=seed)
        assert sorted(order) == [0, 1]
        assert 0 < report.alpha <= 1
        assert report.violations == []
        assert report.latency >= 3.0

    def test_random_mode_reproducible(self, desk2):
        _, frac = solve_ml_lp1(desk2, 2, metric_timescale(desk2, 2, 0.5))
        assert round_ml_lp1(desk2, 2, frac, seed=4)[0] == round_ml_lp1(desk2, 2, frac, seed=4)[0]

    def test_tour_csv(self, desk2, desk2_integral, tmp_path):
        _, report = round_ml_lp1(desk2, 2, desk2_integral, mode="det")
        path = tmp_path / "tours.csv"
        report.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "time,grid_index,nodes,closed_length,bound,ok"
        assert len(lines) == len(report.tours) + 1

    def test_bad_mode(self, desk2, desk2_integral):
        with pytest.raises(RoundingError) as exc:
            round_ml_lp1(desk2, 2, desk2_integral, mode="sideways")
        assert exc.value.error_code == "BAD_MODE"

    def test_uncovered_client(self, desk2, desk2_integral):
        desk2_integral.x[1, :] = 0.0
        with pytest.raises(RoundingError) as exc:
            round_ml_lp1(desk2, 2, desk2_integral, mode="det")
        assert exc.value.error_code == "INFEASIBLE_FRAC"


class TestSystematicSample:
    """Test dependent column sampling"""

    def test_certain_pick(self):
        assert systematic_sample([1.0], 0) == [0]

    def test_unit_mass_picks_exactly_one(self):
        for seed in range(50):
            assert len(systematic_sample([0.5, 0.5], seed)) == 1

    def test_cardinality_cap(self):
        rng = make_rng(8)
        for _ in range(200):
            assert len(systematic_sample([0.4, 0.4, 0.4], rng)) <= 2

    def test_marginals(self):
        values = [0.2, 0.5, 0.3]
        rng = make_rng(5)
        runs = 20000
        counts = np.zeros(3)
        for _ in range(runs):
            for c in systematic_sample(values, rng):
                counts[c] += 1
        for c, z in enumerate(values):
            sigma = math.sqrt(z * (1 - z) / runs)
            assert abs(counts[c] / runs - z) <= 4 * sigma


class TestRoundMlLp2:
    """Test path-column rounding"""

    def test_single_column(self):
        result = solve_ml_lp2_colgen(SINGLE, 1, metric_timescale(SINGLE, 1))
        order, report = round_ml_lp2(SINGLE, 1, result, seed=0)
        assert order == [0]
        assert report.success
        assert report.latency == 1.0

    def test_desk2_success_rate(self, desk2):
        result = solve_ml_lp2_colgen(desk2, 2, metric_timescale(desk2, 2, 0.5))
        successes = sum(round_ml_lp2(desk2, 2, result, seed=s)[1].success for s in range(200))
        assert successes >= 190

    def test_latency_at_least_optimum(self, desk2):
        result = solve_ml_lp2_colgen(desk2, 2, metric_timescale(desk2, 2, 0.5))
        order, report = round_ml_lp2(desk2, 2, result, seed=3)
        assert report.success
        assert sorted(order) == [0, 1]
        assert report.latency >= 3.0

    def test_phase_csv(self, desk2, tmp_path):
        result = solve_ml_lp2_colgen(desk2, 2, metric_timescale(desk2, 2, 0.5))
        _, report = round_ml_lp2(desk2, 2, result, seed=1)
        path = tmp_path / "picks.csv"
        report.write_csv(path)
        assert path.read_text().splitlines()[0] == "time,grid_index,mass,picked,covered"


def latency_metric(n: int, seed: int) -> np.ndarray:
    """Euclidean metric over n clients plus the root n"""
    return generate(GenSpec(family=Family.EUCLIDEAN, n=n, m=1), seed).time_metric


@pytest.mark.slow
class TestMlBatches:
    """Test the latency roundings over seeded batches"""

    def test_det_mode_two_hundred_instances(self):
        for seed in range(200):
            n = 3 + seed % 3
            metric = latency_metric(n, seed)
            _, frac = solve_ml_lp1(metric, n, metric_timescale(metric, n, 0.5))
            order, report = round_ml_lp1(metric, n, frac, mode="det")
            assert sorted(order) == list(range(n))
            assert report.violations == []

    def test_path_rounding_success_rate(self):
        metric = latency_metric(5, 8)
        result = solve_ml_lp2_colgen(metric, 5, metric_timescale(metric, 5, 0.5))
        successes = sum(round_ml_lp2(metric, 5, result, seed=s)[1].success for s in range(200))
        assert successes >= 190
