"""
Tests for phased rounding on general instances
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from src.errors import RoundingError
from src.exact import exact_mlufl
from src.generators import Family, GenSpec, generate
from src.instance import Solution, evaluate
from src.relaxations import FractionalMlufl, build_timescale, solve_mlufl_relaxation
from src.round_general import (
    GeneralDiagnostics,
    GeneralParams,
    PhaseMode,
    RouteSegment,
    plan_phases,
    round_general,
    round_general_lp_driver,
    round_general_norm_driver,
    split_tour,
)
from src.treekit import WeightedTree


def integral_frac(inst):
    ts = build_timescale(inst, 0.5)
    return FractionalMlufl.from_solution(inst, Solution([[0, 1]], [0, 1]), ts), ts


class TestPhasePlan:
    """Test phase targets and client neighbourhoods"""

    def test_plain_targets(self, desk1_instance):
        frac, ts = integral_frac(desk1_instance)
        plan = plan_phases(desk1_instance, frac, ts, GeneralParams())
        assert plan.neighborhoods == [[0], [1]]
        assert list(plan.tau) == [1.0, 2.0]
        assert plan.targets[:3] == [1.0, 2.0, 4.0]
        assert plan.ready(0) == [0]
        assert plan.ready(1) == [0, 1]

    def test_last_phase_reaches_every_client(self, desk1_instance):
        frac, ts = integral_frac(desk1_instance)
        for mode in PhaseMode:
            plan = plan_phases(desk1_instance, frac, ts, GeneralParams(mode=mode, p=2.0))
            assert ts(plan.targets[-1]) >= plan.tau_max

    def test_growth_targets(self, desk1_instance):
        frac, ts = integral_frac(desk1_instance)
        plan = plan_phases(desk1_instance, frac, ts, GeneralParams(mode=PhaseMode.GROWTH, p=2.0))
        assert plan.targets[0] == pytest.approx(1.5)
        assert plan.targets[1] / plan.targets[0] == pytest.approx(math.sqrt(2))

    def test_uncovered_client_rejected(self, desk1_instance):
        frac, ts = integral_frac(desk1_instance)
        frac.x[:, 1, :] = 0.0
        with pytest.raises(RoundingError) as exc:
            plan_phases(desk1_instance, frac, ts, GeneralParams())
        assert exc.value.error_code == "INFEASIBLE_FRAC"


class TestSplitTour:
    """Test cutting a tour into k routes"""

    def test_equal_pieces(self):
        arrival = {10: 1.0, 11: 2.0, 12: 3.0, 13: 4.0}
        assert split_tour([10, 11, 12, 13], arrival, 4.0, 2) == [[10], [11, 12, 13]]

    def test_zero_length(self):
        assert split_tour([1, 2], {1: 0.0, 2: 0.0}, 0.0, 3) == [[1, 2], [], []]


class TestRoundGeneral:
    """Test the rounding loop"""

    def test_integral_point_is_recovered(self, desk1_instance):
        frac, ts = integral_frac(desk1_instance)
        solution, diagnostics = round_general(desk1_instance, frac, ts, GeneralParams(seed=3))
        assert solution.assignment == [0, 1]
        assert diagnostics.connection_violations == 0
        assert evaluate(desk1_instance, solution).total >= 8

    def test_same_seed_same_solution(self, desk1_instance):
        frac, ts = integral_frac(desk1_instance)
        first, _ = round_general(desk1_instance, frac, ts, GeneralParams(seed=5))
        second, _ = round_general(desk1_instance, frac, ts, GeneralParams(seed=5))
        assert first == second

    def test_infeasible_fractional_point(self, desk1_instance):
        frac, ts = integral_frac(desk1_instance)
        frac.x[:, 0, :] = 0.0
        with pytest.raises(RoundingError) as exc:
            round_general(desk1_instance, frac, ts)
        assert exc.value.error_code == "INFEASIBLE_FRAC"

    def test_phase_records_csv(self, desk1_instance, tmp_path):
        frac, ts = integral_frac(desk1_instance)
        _, diagnostics = round_general(desk1_instance, frac, ts, GeneralParams(seed=1))
        path = tmp_path / "phases.csv"
        diagnostics.write_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("attempt,phase,target")
        assert len(lines) == len(diagnostics.records) + 1

    def test_only_ready_clients_connect(self, desk1_instance, mocker):
        frac, ts = integral_frac(desk1_instance)
        both = WeightedTree(desk1_instance.root)
        both.add_edge(desk1_instance.root, 0, 1.0)
        both.add_edge(0, 1, 1.0)
        mocker.patch("src.round_general._run_phase", return_value=({0, 1}, both, 0, 0.0))
        solution, diagnostics = round_general(desk1_instance, frac, ts, GeneralParams(seed=0))
        # client 1 is not ready in phase 0 although its facility is open
        assert [r.connected for r in diagnostics.records] == [1, 1]
        assert solution.assignment == [0, 1]

    def test_segments_certified_per_phase(self, desk1_instance):
        inst = replace(desk1_instance, route_count=2)
        frac, ts = integral_frac(inst)
        solution, diagnostics = round_general(inst, frac, ts, GeneralParams(seed=7))
        assert diagnostics.segments
        for segment in diagnostics.segments:
            grid_time = diagnostics.plan.grid_times[segment.phase]
            assert segment.bound >= 2 * grid_time
            assert segment.ok
        assert diagnostics.route_bound_ok
        assert len(solution.routes) == 2

    def test_long_segment_fails_route_bound(self, desk1_instance):
        frac, ts = integral_frac(desk1_instance)
        diagnostics = GeneralDiagnostics(plan_phases(desk1_instance, frac, ts, GeneralParams()))
        diagnostics.segments = [RouteSegment(0, 0, 3.0, 3.0), RouteSegment(1, 1, 5.0, 4.0)]
        assert diagnostics.segments[0].ok
        assert not diagnostics.route_bound_ok


class TestDrivers:
    """Test the LP-to-solution drivers"""

    def test_desk1_cost_at_least_lp_and_optimum(self, desk1_instance):
        result = round_general_lp_driver(desk1_instance, 0.5, GeneralParams(seed=2))
        assert result.lp_value <= exact_mlufl(desk1_instance).value + 1e-6
        assert result.breakdown.total >= 8 - 1e-9
        assert result.ratio >= 1 - 1e-6

    @pytest.mark.parametrize("seed", range(3))
    def test_generated_instance(self, seed):
        inst = generate(GenSpec(family=Family.EUCLIDEAN, n=3, m=3), seed)
        result = round_general_lp_driver(inst, 0.5, GeneralParams(seed=seed))
        assert len(result.solution.assignment) == inst.m
        assert result.diagnostics.connection_violations == 0
        assert result.breakdown.total >= exact_mlufl(inst).value - 1e-6

    def test_two_routes_respect_length_bound(self, desk1_instance):
        inst = replace(desk1_instance, route_count=2)
        result = round_general_lp_driver(inst, 0.5, GeneralParams(seed=4))
        assert len(result.solution.routes) == 2
        assert result.diagnostics.route_bound_ok

    def test_norm_driver(self, desk1_instance):
        result = round_general_norm_driver(desk1_instance, 2.0, 0.5, GeneralParams(seed=6))
        assert result.breakdown.latency_norm is not None
        assert np.isfinite(result.breakdown.total)

    def test_group_instance_uses_zero_cost_facilities(self):
        inst = generate(GenSpec(family=Family.MGL, n=4, m=2, group_size=2), 1)
        result = round_general_lp_driver(inst, 0.5, GeneralParams(seed=1))
        assert all(inst.connection_cost[i, j] == 0 for j, i in enumerate(result.solution.assignment))

    def test_reuses_given_relaxation(self, desk1_instance, mocker):
        relaxation = solve_mlufl_relaxation(desk1_instance, build_timescale(desk1_instance, 0.5))
        solve = mocker.patch("src.round_general.solve_mlufl_relaxation")
        first = round_general_lp_driver(desk1_instance, params=GeneralParams(seed=1), relaxation=relaxation)
        second = round_general_lp_driver(desk1_instance, params=GeneralParams(seed=2), relaxation=relaxation)
        solve.assert_not_called()
        assert first.lp_value == second.lp_value == relaxation.value


@pytest.fixture(scope="module")
def euclidean_10x10():
    inst = generate(GenSpec(family=Family.EUCLIDEAN, n=10, m=10), 11)
    return inst, solve_mlufl_relaxation(inst, build_timescale(inst, 1.0))


@pytest.mark.slow
class TestSeededRuns:
    """Test success rate and connection certificates over many rounding seeds"""

    def test_two_hundred_seeds(self, euclidean_10x10):
        inst, relaxation = euclidean_10x10
        assert relaxation.frac is not None
        successes = 0
        for seed in range(200):
            try:
                result = round_general_lp_driver(inst, params=GeneralParams(seed=seed), relaxation=relaxation)
            except RoundingError:
                continue
            successes += 1
            assert result.diagnostics.connection_violations == 0
            assert result.breakdown.total >= result.lp_value - 1e-6
        assert successes >= 190
