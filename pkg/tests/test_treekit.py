"""
Tests for tree embeddings, GKR rounding, spanning trees and tours
"""

import itertools
import math

import numpy as np
import pytest

from src.errors import TreeError
from src.seeding import make_rng
from src.treekit import (
    Tour,
    WeightedTree,
    euler_tour,
    evaluate_order,
    flow_normalize,
    frt_embed,
    gk_concatenate,
    gkr_round,
    gkr_round_many,
    mst,
)


def euclidean(points: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=2))


def seven_edge_tree() -> WeightedTree:
    tree = WeightedTree("r")
    for parent, child in [("r", "a"), ("r", "b"), ("a", "c"), ("a", "d"), ("b", "e"), ("b", "f"), ("f", "g")]:
        tree.add_edge(parent, child, 1.0)
    return tree


SEVEN_Z = {"a": 0.8, "b": 0.6, "c": 0.5, "d": 0.3, "e": 0.6, "f": 0.4, "g": 0.1}


class TestWeightedTree:
    """Test tree structure helpers"""

    def test_distance_and_path(self):
        tree = WeightedTree("r")
        tree.add_edge("r", "a", 1.0)
        tree.add_edge("a", "b", 2.0)
        tree.add_edge("r", "c", 4.0)
        assert tree.distance("b", "c") == 7.0
        assert tree.path_edges("b", "c") == ["b", "a", "c"]
        assert tree.depth("b") == 3.0

    def test_reroot_keeps_distances(self):
        tree = WeightedTree("r")
        tree.add_edge("r", "a", 1.0)
        tree.add_edge("a", "b", 2.0)
        rerooted = tree.reroot("b")
        assert rerooted.root == "b"
        assert rerooted.parent["r"] == "a"
        assert rerooted.distance("r", "b") == 3.0

    def test_subtree_must_be_rooted(self):
        tree = seven_edge_tree()
        with pytest.raises(TreeError) as exc:
            tree.subtree({"g"})
        assert exc.value.error_code == "NOT_ROOTED"

    def test_bad_edge(self):
        tree = WeightedTree("r")
        with pytest.raises(TreeError):
            tree.add_edge("x", "y", 1.0)


class TestFrtEmbed:
    """Test the random tree embedding"""

    def test_two_points_dominate(self):
        tree = frt_embed(np.array([[0.0, 1.0], [1.0, 0.0]]), 0)
        assert tree.distance(0, 1) >= 1.0

    def test_single_point(self):
        tree = frt_embed(np.zeros((1, 1)), 0)
        assert len(tree) == 1
        assert tree.distance(0, 0) == 0

    def test_dominance_and_leaves(self):
        points = make_rng(3).uniform(0, 10, size=(8, 2))
        metric = euclidean(points)
        for seed in range(20):
            tree = frt_embed(metric, seed)
            assert tree.is_tree()
            assert sorted(v for v in tree.leaves() if isinstance(v, int)) == list(range(8))
            for u, v in itertools.combinations(range(8), 2):
                assert tree.distance(u, v) >= metric[u, v] - 1e-9

    def test_rooted_at_leaf(self):
        metric = euclidean(make_rng(1).uniform(0, 5, size=(5, 2)))
        tree = frt_embed(metric, 2, root=4)
        assert tree.root == 4

    def test_same_seed_same_tree(self):
        metric = euclidean(make_rng(4).uniform(0, 5, size=(6, 2)))
        assert frt_embed(metric, 9).edges() == frt_embed(metric, 9).edges()

    @pytest.mark.slow
    def test_mean_stretch_band(self):
        metric = euclidean(make_rng(16).uniform(0, 100, size=(16, 2)))
        stretches = []
        for seed in range(500):
            tree = frt_embed(metric, seed)
            stretches.append(
                max(tree.distance(u, v) / metric[u, v] for u, v in itertools.combinations(range(16), 2))
            )
        assert np.mean(stretches) <= 8 * math.log(16)


class TestGkrRound:
    """Test the randomized subtree selection"""

    def test_all_ones_keeps_everything(self):
        tree = seven_edge_tree()
        out = gkr_round(tree, {v: 1.0 for v in tree.parent}, 0)
        assert len(out) == len(tree)

    def test_all_zeros_keeps_root(self):
        tree = seven_edge_tree()
        out = gkr_round(tree, {v: 0.0 for v in tree.parent}, 0)
        assert out.nodes == ["r"]

    def test_output_is_rooted_subtree(self):
        tree = seven_edge_tree()
        sample = gkr_round_many(tree, SEVEN_Z, 200, 5)
        for r in range(200):
            kept = sample.run(r)
            assert all(v == "r" or tree.parent[v] in kept for v in kept)

    def test_marginals(self):
        tree = seven_edge_tree()
        runs = 20000
        sample = gkr_round_many(tree, SEVEN_Z, runs, 11)
        for k, v in enumerate(sample.order):
            if v == "r":
                continue
            z = SEVEN_Z[v]
            sigma = math.sqrt(z * (1 - z) / runs)
            assert abs(sample.kept[:, k].mean() - z) <= 4 * sigma

    @pytest.mark.slow
    def test_group_miss_frequency(self):
        tree = seven_edge_tree()
        runs = 20000
        sample = gkr_round_many(tree, SEVEN_Z, runs, 23)
        index = {v: k for k, v in enumerate(sample.order)}
        group = ["d", "e"]
        flow = SEVEN_Z["d"] + SEVEN_Z["e"]
        hit = np.zeros(runs, dtype=bool)
        for v in group:
            hit |= sample.kept[:, index[v]]
        bound = math.exp(-flow / (64 * max(math.log2(len(tree)), 1)))
        sigma = math.sqrt(bound * (1 - bound) / runs)
        assert (~hit).mean() <= bound + 3 * sigma
        # the two branches are independent
        expected = (1 - SEVEN_Z["d"]) * (1 - SEVEN_Z["e"])
        assert abs((~hit).mean() - expected) <= 4 * math.sqrt(expected * (1 - expected) / runs)

    def test_non_monotone_rejected(self):
        tree = seven_edge_tree()
        z = dict(SEVEN_Z, g=0.9)
        with pytest.raises(TreeError) as exc:
            gkr_round(tree, z, 0)
        assert exc.value.error_code == "NOT_MONOTONE"

    def test_tiny_monotonicity_slack_rounded_down(self):
        tree = seven_edge_tree()
        z = dict(SEVEN_Z, g=0.4 + 1e-10)
        gkr_round(tree, z, 0)


class TestFlowNormalize:
    """Test the capped monotone normalisation"""

    def test_proportional_push(self):
        tree = WeightedTree("r")
        tree.add_edge("r", "a", 1.0)
        tree.add_edge("a", "b", 1.0)
        tree.add_edge("a", "c", 1.0)
        out = flow_normalize(tree, {"a": 0.7, "b": 0.5, "c": 0.9}, [["b", "c"]])
        assert out["a"] == pytest.approx(0.7)
        assert out["b"] == pytest.approx(0.25)
        assert out["c"] == pytest.approx(0.45)

    def test_values_capped_at_one(self):
        tree = WeightedTree("r")
        tree.add_edge("r", "a", 1.0)
        out = flow_normalize(tree, {"a": 3.0}, [["a"]])
        assert out["a"] == 1.0


class TestMstAndTours:
    """Test spanning trees and Euler tours"""

    def test_two_nodes(self):
        tree = mst(np.array([[0.0, 3.0], [3.0, 0.0]]), [0], 1)
        assert tree.edges() == [(1, 0, 3.0)]

    def test_desk2_mst_and_tour(self, desk2):
        tree = mst(desk2, [0, 1], 2)
        assert tree.total_weight == 2.0
        tour = euler_tour(tree, desk2)
        assert tour.nodes == [2, 0, 1]
        assert tour.closed_length <= 4.0

    def test_equal_weights_stable(self):
        metric = 1.0 - np.eye(5)
        first, second = mst(metric, range(4), 4), mst(metric, range(4), 4)
        assert first.total_weight == 4.0
        assert first.edges() == second.edges()

    def test_star_tour(self):
        metric = np.array([
            [0.0, 2.0, 2.0, 1.0],
            [2.0, 0.0, 2.0, 1.0],
            [2.0, 2.0, 0.0, 1.0],
            [1.0, 1.0, 1.0, 0.0],
        ])
        tour = euler_tour(mst(metric, [0, 1, 2], 3), metric)
        assert tour.nodes == [3, 0, 1, 2]
        assert tour.closed_length <= 6.0
        assert all(t <= tour.length for t in tour.arrival.values())

    def test_best_direction(self):
        metric = np.array([[0.0, 2.0, 1.0], [2.0, 0.0, 1.0], [1.0, 1.0, 0.0]])
        tree = mst(metric, [0, 1], 2)
        assert euler_tour(tree, metric, direction="forward").nodes == [2, 0, 1]
        assert euler_tour(tree, metric, direction="best", weights={1: 10.0}).nodes == [2, 1, 0]

    def test_auxiliary_nodes_skipped(self):
        metric = euclidean(make_rng(2).uniform(0, 5, size=(5, 2)))
        tour = euler_tour(frt_embed(metric, 3, root=4), metric)
        assert sorted(tour.nodes) == [0, 1, 2, 3, 4]
        assert tour.root == 4

    def test_bad_direction(self, desk2):
        with pytest.raises(TreeError):
            euler_tour(mst(desk2, [0], 2), desk2, direction="sideways")

    def test_evaluate_order(self, desk2):
        arrival, total = evaluate_order(desk2, 2, [0, 1])
        assert arrival[1] == 2.0
        assert total == 3.0


def _tour(nodes, closed):
    return Tour([0] + nodes, closed / 2, closed, {v: 0.0 for v in [0] + nodes})


class TestGkConcatenate:
    """Test the nested-tour concatenation"""

    def test_single_tour(self):
        result = gk_concatenate([_tour([1, 2], 4.0)], [1, 2])
        assert result.chosen == [0]
        assert result.bound == 8.0

    def test_skips_small_tour(self):
        tours = [_tour([1], 10.0), _tour([1, 2, 3, 4, 5], 10.0)]
        result = gk_concatenate(tours, [1, 2, 3, 4, 5])
        assert result.chosen == [1]
        assert result.bound == 50.0

    def test_keeps_cheap_prefix(self):
        tours = [_tour([1, 2, 3, 4], 1.0), _tour([1, 2, 3, 4, 5], 10.0)]
        result = gk_concatenate(tours, [1, 2, 3, 4, 5])
        assert result.chosen == [0, 1]
        assert result.bound == 15.0
        assert result.order == [1, 2, 3, 4, 5]

    def test_zero_cost(self):
        assert gk_concatenate([_tour([1], 0.0)], [1]).bound == 0.0

    def test_uncovered_universe(self):
        with pytest.raises(TreeError) as exc:
            gk_concatenate([_tour([1], 1.0)], [1, 2])
        assert exc.value.error_code == "UNCOVERED"

    def test_not_nested(self):
        with pytest.raises(TreeError):
            gk_concatenate([_tour([1], 1.0), _tour([2], 1.0)], [1, 2])
