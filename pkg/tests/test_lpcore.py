"""
Tests for the LP core: simplex, max flow and cutting planes
"""

import math

import numpy as np
import pytest

from src.errors import LpError
from src.lpcore import (
    Constraint,
    FlowNetwork,
    LpModel,
    LpStatus,
    Sense,
    SimplexSolver,
    cutting_plane_solve,
    enumerate_min_cut,
    max_flow,
    solution_feasible,
    solve_lp,
)
from src.relaxations import build_mlufl_lp, build_timescale

from .conftest import desk1


def two_var_model() -> LpModel:
    model = LpModel("pair")
    x = model.add_variable("x", (), cost=1.0)
    y = model.add_variable("y", (), cost=1.0)
    model.add_constraint({x: 1.0, y: 1.0}, Sense.GE, 1.0, "cover")
    return model


class TestSimplex:
    """Test the tableau simplex"""

    def test_single_bound(self):
        model = LpModel()
        x = model.add_variable("x", (), cost=1.0)
        model.add_constraint({x: 1.0}, Sense.GE, 3.0)
        solution = solve_lp(model)
        assert solution.status == LpStatus.OPTIMAL
        assert solution.value("x") == pytest.approx(3.0)
        assert solution.objective == pytest.approx(3.0)

    def test_covering_pair(self):
        solution = solve_lp(two_var_model())
        assert solution.objective == pytest.approx(1.0)
        assert solution.duals[0] == pytest.approx(1.0)
        assert solution_feasible(solution)

    def test_duality_gap(self):
        model = LpModel()
        x = model.add_variable("x", (), cost=2.0)
        y = model.add_variable("y", (), cost=3.0)
        model.add_constraint({x: 1.0, y: 2.0}, Sense.GE, 4.0)
        model.add_constraint({x: 3.0, y: 1.0}, Sense.GE, 3.0)
        model.add_constraint({x: 1.0, y: 1.0}, Sense.LE, 10.0)
        solution = solve_lp(model)
        assert solution.is_optimal
        assert abs(solution.objective - solution.dual_objective) <= 1e-6 * (1 + abs(solution.objective))

    def test_upper_bound(self):
        model = LpModel()
        model.add_variable("x", (), cost=-1.0, upper=4.0)
        solution = solve_lp(model)
        assert solution.objective == pytest.approx(-4.0)

    def test_free_variable(self):
        model = LpModel()
        x = model.add_variable("x", (), cost=1.0, lower=-math.inf)
        model.add_constraint({x: 1.0}, Sense.GE, -2.0)
        assert solve_lp(model).objective == pytest.approx(-2.0)

    def test_equality_row(self):
        model = LpModel()
        x = model.add_variable("x", (), cost=1.0)
        y = model.add_variable("y", (), cost=2.0)
        model.add_constraint({x: 1.0, y: 1.0}, Sense.EQ, 2.0)
        model.add_constraint({y: 1.0}, Sense.GE, 0.5)
        assert solve_lp(model).objective == pytest.approx(2.5)

    def test_infeasible(self):
        model = LpModel()
        x = model.add_variable("x", ())
        model.add_constraint({x: 1.0}, Sense.LE, -1.0)
        solution = solve_lp(model)
        assert solution.status == LpStatus.INFEASIBLE
        assert not solution.is_optimal

    def test_unbounded(self):
        model = LpModel()
        model.add_variable("x", (), cost=-1.0)
        assert solve_lp(model).status == LpStatus.UNBOUNDED

    def test_deterministic(self):
        a, b = solve_lp(two_var_model()), solve_lp(two_var_model())
        assert np.array_equal(a.values, b.values)


class TestModel:
    """Test model building"""

    def test_duplicate_variable(self):
        model = LpModel()
        model.add_variable("x", (1,))
        with pytest.raises(LpError) as exc:
            model.add_variable("x", (1,))
        assert exc.value.error_code == "DUPLICATE_VARIABLE"

    def test_bad_column(self):
        model = LpModel()
        with pytest.raises(LpError) as exc:
            model.add_constraint({3: 1.0}, Sense.LE, 1.0)
        assert exc.value.error_code == "BAD_COLUMN"

    def test_lp_text_dump(self):
        text = two_var_model().to_lp_format()
        assert "Minimize" in text
        assert " cover: 1 x + 1 y >= 1" in text
        assert text.rstrip().endswith("End")


class TestMaxFlow:
    """Test max flow and min cut"""

    def test_single_arc(self):
        result = max_flow(FlowNetwork(["s", "t"], [("s", "t", 5.0)], "s", "t"))
        assert result.value == 5
        assert result.source_side == frozenset({"s"})

    def test_parallel_paths(self):
        arcs = [("s", "a", 2.0), ("a", "t", 2.0), ("s", "b", 3.0), ("b", "t", 3.0)]
        assert max_flow(FlowNetwork(["s", "a", "b", "t"], arcs, "s", "t")).value == 5

    def test_diamond_matches_enumeration(self):
        arcs = [("s", "a", 3.0), ("s", "b", 3.0), ("a", "b", 1.0), ("a", "t", 1.0), ("b", "t", 3.0)]
        net = FlowNetwork(["s", "a", "b", "t"], arcs, "s", "t")
        result = max_flow(net)
        assert result.value == pytest.approx(enumerate_min_cut(net))
        assert result.value == pytest.approx(net.cut_capacity(result.source_side))

    def test_negative_capacity(self):
        with pytest.raises(LpError):
            FlowNetwork(["s", "t"], [("s", "t", -1.0)], "s", "t")


class TestCuttingPlanes:
    """Test the cutting-plane driver"""

    def test_no_cuts_needed(self):
        solution = cutting_plane_solve(two_var_model(), lambda model, sol: [])
        assert solution.rounds == 1
        assert solution.cuts_added == 0

    def test_cut_added_once(self):
        model = LpModel()
        x = model.add_variable("x", (), cost=1.0)
        y = model.add_variable("y", (), cost=1.0)

        def oracle(m, sol):
            if sol.values[x] + sol.values[y] < 1 - 1e-6:
                return [Constraint({x: 1.0, y: 1.0}, Sense.GE, 1.0, "cut")]
            return []

        solution = cutting_plane_solve(model, oracle)
        assert solution.is_optimal
        assert solution.objective == pytest.approx(1.0)
        assert solution.cuts_added == 1

    def test_round_limit(self):
        model = LpModel()
        x = model.add_variable("x", (), cost=1.0)

        def stubborn(m, sol):
            return [Constraint({x: 1.0}, Sense.GE, 10.0, "always")]

        solution = cutting_plane_solve(model, stubborn, max_rounds=3)
        assert solution.status == LpStatus.ITERATION_LIMIT
        assert solution.cuts_added == 3

    def test_base_model_untouched(self):
        model = two_var_model()
        cutting_plane_solve(model, lambda m, sol: [Constraint({0: 1.0}, Sense.GE, 1.0)] if sol.values[0] < 1 else [])
        assert model.num_constraints == 1


def weighted_cover() -> LpModel:
    model = LpModel("weighted")
    x = model.add_variable("x", (), cost=1.0)
    y = model.add_variable("y", (), cost=2.0)
    model.add_constraint({x: 1.0, y: 1.0}, Sense.GE, 1.0, "cover")
    return model


class TestSimplexSolver:
    """Test re-solving from the kept basis after rows are appended"""

    def test_warm_resolve_after_cut(self):
        solver = SimplexSolver(weighted_cover())
        assert solver.solve().objective == pytest.approx(1.0)
        solver.add_rows([Constraint({0: 1.0}, Sense.LE, 0.25, "cap")])
        solution = solver.reoptimize()
        assert solution.is_optimal
        assert solution.objective == pytest.approx(1.75)
        assert solution.value("x") == pytest.approx(0.25)
        assert list(solution.duals) == pytest.approx([2.0, -1.0])
        assert solution.dual_objective == pytest.approx(1.75)
        assert (solver.warm_solves, solver.cold_solves) == (1, 1)

    def test_warm_matches_cold(self):
        solver = SimplexSolver(weighted_cover())
        solver.solve()
        solver.add_rows([
            Constraint({0: 1.0}, Sense.LE, 0.25, "cap"),
            Constraint({0: 1.0, 1: 2.0}, Sense.GE, 1.5, "second"),
        ])
        warm = solver.reoptimize()
        cold = solve_lp(solver.model.copy())
        assert warm.objective == pytest.approx(cold.objective)
        assert np.allclose(warm.values, cold.values)

    def test_equality_row_solves_from_scratch(self):
        solver = SimplexSolver(weighted_cover())
        solver.solve()
        solver.add_rows([Constraint({0: 1.0}, Sense.EQ, 0.5, "pin")])
        solution = solver.reoptimize()
        assert solution.objective == pytest.approx(1.5)
        assert (solver.warm_solves, solver.cold_solves) == (0, 2)

    def test_infeasible_cut(self):
        solver = SimplexSolver(weighted_cover())
        solver.solve()
        solver.add_rows([Constraint({0: 1.0, 1: 1.0}, Sense.LE, 0.5, "tight")])
        assert solver.reoptimize().status == LpStatus.INFEASIBLE

    def test_reoptimize_before_solve(self):
        solver = SimplexSolver(two_var_model())
        assert solver.reoptimize().objective == pytest.approx(1.0)
        assert solver.cold_solves == 1

    def test_cut_loop_matches_cold_solve(self):
        inst = desk1()
        model, oracle = build_mlufl_lp(inst, build_timescale(inst, 0.5))
        solution = cutting_plane_solve(model, oracle)
        assert solution.is_optimal
        cold = solve_lp(solution.model.copy())
        assert solution.objective == pytest.approx(cold.objective, abs=1e-7)
        assert abs(solution.objective - solution.dual_objective) <= 1e-6 * (1 + abs(solution.objective))
