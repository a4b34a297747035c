"""
Tree machinery shared by the rounding algorithms

- WeightedTree: rooted tree with parent pointers and edge weights
- frt_embed: random hierarchically well-separated tree dominating a metric
- flow_normalize / gkr_round: capped, monotone edge values and the
  top-down randomized subtree selection on them
- mst, euler_tour: spanning trees and shortcut tours
- gk_concatenate: best subsequence of nested tours under the latency bound
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, Iterable, List, Mapping, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np

from .config import Tolerances
from .errors import TreeError
from .seeding import RngLike, as_rng

logger = logging.getLogger(__name__)

Node = Hashable


def node_key(v: Node) -> Tuple:
    """Sort key putting metric nodes (ints) before auxiliary nodes"""
    if isinstance(v, (int, np.integer)):
        return (0, int(v), "")
    return (1, 0, repr(v))


@dataclass
class WeightedTree:
    """Rooted tree; ``weight[v]`` is the weight of the edge from v to its parent"""

    root: Node
    parent: Dict[Node, Node] = field(default_factory=dict)
    weight: Dict[Node, float] = field(default_factory=dict)

    def __post_init__(self):
        self._children: Optional[Dict[Node, List[Node]]] = None

    # -- structure -------------------------------------------------------

    @property
    def nodes(self) -> List[Node]:
        return [self.root] + [v for v in self.parent if v != self.root]

    def __contains__(self, v: Node) -> bool:
        return v == self.root or v in self.parent

    def __len__(self) -> int:
        return 1 + len(self.parent)

    def add_edge(self, parent: Node, child: Node, weight: float) -> None:
        if child in self or parent not in self:
            raise TreeError("BAD_EDGE", f"cannot attach {child!r} under {parent!r}")
        if weight < 0:
            raise TreeError("NEGATIVE_WEIGHT", f"edge ({parent!r}, {child!r}) has negative weight")
        self.parent[child] = parent
        self.weight[child] = float(weight)
        self._children = None

    def children(self, v: Node) -> List[Node]:
        if self._children is None:
            kids: Dict[Node, List[Node]] = {u: [] for u in self.nodes}
            for child, par in self.parent.items():
                kids[par].append(child)
            for lst in kids.values():
                lst.sort(key=node_key)
            self._children = kids
        return self._children.get(v, [])

    def edges(self) -> List[Tuple[Node, Node, float]]:
        return [(self.parent[v], v, self.weight[v]) for v in self.preorder() if v != self.root]

    def preorder(self, reverse: bool = False) -> List[Node]:
        order, stack = [], [self.root]
        while stack:
            v = stack.pop()
            order.append(v)
            kids = self.children(v)
            stack.extend(kids if reverse else reversed(kids))
        return order

    def leaves(self) -> List[Node]:
        return [v for v in self.nodes if not self.children(v) and v != self.root]

    @property
    def total_weight(self) -> float:
        return float(sum(self.weight.values()))

    def path_to_root(self, v: Node) -> List[Node]:
        path = [v]
        while path[-1] != self.root:
            path.append(self.parent[path[-1]])
        return path

    def depth(self, v: Node) -> float:
        """Weighted distance from the root"""
        return float(sum(self.weight[u] for u in self.path_to_root(v)[:-1]))

    def distance(self, u: Node, v: Node) -> float:
        up = self.path_to_root(u)
        on_path = {w: k for k, w in enumerate(up)}
        dist_v = 0.0
        w = v
        while w not in on_path:
            dist_v += self.weight[w]
            w = self.parent[w]
        dist_u = sum(self.weight[x] for x in up[: on_path[w]])
        return float(dist_u + dist_v)

    def path_edges(self, u: Node, v: Node) -> List[Node]:
        """Edges (named by their child node) on the tree path u - v"""
        up = self.path_to_root(u)
        on_path = {w: k for k, w in enumerate(up)}
        from_v = []
        w = v
        while w not in on_path:
            from_v.append(w)
            w = self.parent[w]
        return up[: on_path[w]] + from_v

    def reroot(self, new_root: Node) -> "WeightedTree":
        """Same undirected tree hanging from ``new_root``"""
        if new_root not in self:
            raise TreeError("UNKNOWN_NODE", f"{new_root!r} is not a tree node")
        graph = self.to_networkx()
        out = WeightedTree(new_root)
        stack = [new_root]
        seen = {new_root}
        while stack:
            u = stack.pop()
            for v in sorted(graph.neighbors(u), key=node_key):
                if v not in seen:
                    seen.add(v)
                    out.add_edge(u, v, graph[u][v]["weight"])
                    stack.append(v)
        return out

    def subtree(self, keep: Iterable[Node]) -> "WeightedTree":
        """Restriction to ``keep``, which must be closed under taking parents"""
        keep = set(keep) | {self.root}
        out = WeightedTree(self.root)
        for v in self.preorder():
            if v != self.root and v in keep:
                if self.parent[v] not in keep:
                    raise TreeError("NOT_ROOTED", f"kept node {v!r} has a dropped parent")
                out.add_edge(self.parent[v], v, self.weight[v])
        return out

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_node(self.root)
        for child, par in self.parent.items():
            graph.add_edge(par, child, weight=self.weight[child])
        return graph

    def is_tree(self) -> bool:
        graph = self.to_networkx()
        return nx.is_tree(graph) if graph.number_of_nodes() > 1 else True


# ---------------------------------------------------------------------------
# Random tree embedding
# ---------------------------------------------------------------------------


def frt_embed(metric: np.ndarray, rng: RngLike = None, root: Optional[int] = None) -> WeightedTree:
    """Random hierarchically well-separated tree over the points of ``metric``.

    Leaves are the point indices. Clusters at level i have radius
    beta * 2^(i-1) around the first point of a random permutation, and the
    edge from a level-(i+1) cluster to a level-i child weighs 2^(i+1), so
    tree distances dominate the metric. With ``root`` the tree is rerooted
    at that leaf.
    """
    metric = np.asarray(metric, dtype=float)
    size = metric.shape[0]
    rng = as_rng(rng)
    if size == 1:
        return WeightedTree(0)

    zero = Tolerances.METRIC
    top_node = ("frt", "top")
    tree = WeightedTree(top_node)
    positive = metric[metric > zero]
    if positive.size == 0:
        for p in range(size):
            tree.add_edge(top_node, p, 0.0)
        return tree.reroot(root) if root is not None else tree

    level_top = math.ceil(math.log2(positive.max())) + 1
    level_bottom = math.floor(math.log2(positive.min())) - 1
    perm = rng.permutation(size)
    beta = 2.0 ** rng.uniform(0.0, 1.0)

    counter = 0
    frontier: List[Tuple[Node, List[int]]] = [(top_node, list(range(size)))]
    level = level_top - 1
    while frontier and level >= level_bottom:
        radius = beta * 2.0 ** (level - 1)
        next_frontier = []
        for node, members in frontier:
            pending = set(members)
            parts: List[List[int]] = []
            for center in perm:
                if not pending:
                    break
                ball = sorted(p for p in pending if metric[center, p] <= radius)
                if ball:
                    parts.append(ball)
                    pending.difference_update(ball)
            if len(parts) == 1:
                next_frontier.append((node, members))
                continue
            for part in parts:
                if len(part) == 1:
                    tree.add_edge(node, part[0], 2.0 ** (level + 1))
                    continue
                counter += 1
                child = ("frt", level, counter)
                tree.add_edge(node, child, 2.0 ** (level + 1))
                next_frontier.append((child, part))
        frontier = next_frontier
        level -= 1

    # clusters left at the bottom hold points at distance zero
    for node, members in frontier:
        for p in members:
            tree.add_edge(node, p, 0.0)
    return tree.reroot(root) if root is not None else tree


# ---------------------------------------------------------------------------
# GKR rounding
# ---------------------------------------------------------------------------


def flow_normalize(
    tree: WeightedTree, capacity: Mapping[Node, float], groups: Sequence[Iterable[Node]]
) -> Dict[Node, float]:
    """Monotone edge values no larger than ``min(capacity, 1)``.

    For every group, the maximum root-to-group flow under the capped
    capacities is computed bottom-up and pushed back down proportionally;
    the result is the edgewise maximum over groups.
    """
    cap = {v: min(max(float(capacity.get(v, 0.0)), 0.0), 1.0) for v in tree.parent}
    order = tree.preorder()
    out = {v: 0.0 for v in tree.parent}
    for group in groups:
        members = set(group)
        through: Dict[Node, float] = {}
        for v in reversed(order):
            if v == tree.root:
                continue
            if v in members:
                inflow = 1.0
            else:
                inflow = sum(through[c] for c in tree.children(v))
            through[v] = min(cap[v], inflow)
        pushed: Dict[Node, float] = {}
        for v in order:
            kids = tree.children(v)
            if not kids or (v in members and v != tree.root):
                continue
            budget = 1.0 if v == tree.root else pushed.get(v, 0.0)
            demand = sum(through[c] for c in kids)
            share = 0.0 if demand <= 0 else min(1.0, budget / demand)
            for c in kids:
                pushed[c] = through[c] * share
        for v, value in pushed.items():
            out[v] = max(out[v], value)
    return out


@dataclass
class GkrSample:
    """Kept-node masks of R independent runs (one row per run)"""

    order: List[Node]
    kept: np.ndarray

    def run(self, r: int) -> Set[Node]:
        return {v for v, k in zip(self.order, self.kept[r]) if k}

    def union(self, runs: Optional[Sequence[int]] = None) -> Set[Node]:
        rows = self.kept if runs is None else self.kept[list(runs)]
        mask = rows.any(axis=0)
        return {v for v, k in zip(self.order, mask) if k}


def _conditional_probabilities(tree: WeightedTree, z: Mapping[Node, float], order: List[Node]) -> np.ndarray:
    probs = np.zeros(len(order))
    for k, v in enumerate(order):
        if v == tree.root:
            probs[k] = 1.0
            continue
        zv = float(z.get(v, 0.0))
        if zv < -Tolerances.MONOTONE or zv > 1.0 + Tolerances.MONOTONE:
            raise TreeError("BAD_VALUE", f"edge value {zv:g} at {v!r} is outside [0, 1]")
        par = tree.parent[v]
        zp = 1.0 if par == tree.root else float(z.get(par, 0.0))
        if zv > zp + Tolerances.MONOTONE:
            raise TreeError(
                "NOT_MONOTONE",
                f"edge value at {v!r} ({zv:g}) exceeds its parent's ({zp:g})",
                "normalise the values with flow_normalize first",
            )
        zv = min(max(zv, 0.0), zp)
        probs[k] = 0.0 if zp <= 0 else zv / zp
    return probs


def gkr_round_many(tree: WeightedTree, z: Mapping[Node, float], runs: int, rng: RngLike = None) -> GkrSample:
    """``runs`` independent top-down roundings: an edge whose parent edge is
    kept survives with probability z_e / z_parent (root edges with z_e)"""
    rng = as_rng(rng)
    order = tree.preorder()
    index = {v: k for k, v in enumerate(order)}
    probs = _conditional_probabilities(tree, z, order)
    draws = rng.random((runs, len(order)))
    kept = np.zeros((runs, len(order)), dtype=bool)
    kept[:, 0] = True
    for k, v in enumerate(order[1:], start=1):
        kept[:, k] = kept[:, index[tree.parent[v]]] & (draws[:, k] < probs[k])
    return GkrSample(order, kept)


def gkr_round(tree: WeightedTree, z: Mapping[Node, float], rng: RngLike = None) -> WeightedTree:
    sample = gkr_round_many(tree, z, 1, rng)
    return tree.subtree(sample.run(0))


# ---------------------------------------------------------------------------
# Spanning trees and tours
# ---------------------------------------------------------------------------


def tree_from_graph(graph: nx.Graph, root: int) -> WeightedTree:
    """Spanning tree of ``graph`` (shortest edges first) hanging from ``root``"""
    spanning = nx.minimum_spanning_tree(graph, weight="weight", algorithm="kruskal")
    tree = WeightedTree(root)
    stack = [root]
    while stack:
        u = stack.pop()
        for v in sorted(spanning.neighbors(u), key=node_key):
            if v not in tree:
                tree.add_edge(u, v, spanning[u][v]["weight"])
                stack.append(v)
    return tree


def mst(metric: np.ndarray, nodes: Iterable[int], root: int) -> WeightedTree:
    """Minimum spanning tree over ``nodes`` plus ``root``, hanging from ``root``"""
    members = sorted(set(int(v) for v in nodes) | {int(root)})
    graph = nx.Graph()
    graph.add_nodes_from(members)
    for a, u in enumerate(members):
        for v in members[a + 1:]:
            graph.add_edge(u, v, weight=float(metric[u, v]))
    return tree_from_graph(graph, int(root))


@dataclass
class Tour:
    """Shortcut walk from the root; ``arrival[v]`` is the first-visit time"""

    nodes: List[int]
    length: float
    closed_length: float
    arrival: Dict[int, float]

    @property
    def root(self) -> int:
        return self.nodes[0]

    @property
    def visited(self) -> List[int]:
        return self.nodes[1:]

    def covers(self) -> Set[int]:
        return set(self.nodes)


def walk(metric: np.ndarray, nodes: Sequence[int]) -> Tour:
    """Tour through ``nodes`` in the given order (duplicates skipped)"""
    seen: List[int] = []
    marks: Set[int] = set()
    for v in nodes:
        if v not in marks:
            marks.add(v)
            seen.append(int(v))
    arrival = {seen[0]: 0.0}
    elapsed = 0.0
    for a, b in zip(seen, seen[1:]):
        elapsed += float(metric[a, b])
        arrival[b] = elapsed
    closed = elapsed + (float(metric[seen[-1], seen[0]]) if len(seen) > 1 else 0.0)
    return Tour(seen, elapsed, closed, arrival)


def euler_tour(
    tree: WeightedTree,
    metric: np.ndarray,
    direction: str = "forward",
    keep: Optional[Callable[[Node], bool]] = None,
    weights: Optional[Mapping[int, float]] = None,
) -> Tour:
    """Shortcut Euler tour of the doubled tree.

    ``keep`` selects which tree nodes are visited (the root always is);
    ``direction="best"`` tries both orientations and keeps the one with the
    smaller weighted sum of first-visit times.
    """
    if direction not in ("forward", "reverse", "best"):
        raise TreeError("BAD_DIRECTION", f"unknown tour direction {direction!r}")
    keep = keep or (lambda v: isinstance(v, (int, np.integer)))

    def oriented(reverse: bool) -> Tour:
        order = [tree.root] + [v for v in tree.preorder(reverse=reverse)[1:] if keep(v)]
        return walk(metric, order)

    if direction != "best":
        return oriented(direction == "reverse")
    forward, backward = oriented(False), oriented(True)

    def score(t: Tour) -> float:
        return sum((weights or {}).get(v, 1.0) * t.arrival[v] for v in t.visited)

    return backward if score(backward) < score(forward) - 1e-12 else forward


# ---------------------------------------------------------------------------
# Concatenation of nested tours
# ---------------------------------------------------------------------------


@dataclass
class Concatenation:
    chosen: List[int]
    order: List[int]
    bound: float


def gk_concatenate(
    tours: Sequence[Tour], universe: Iterable[int], weights: Optional[Mapping[int, float]] = None
) -> Concatenation:
    """Subsequence of nested tours minimising sum over nodes of the closed
    length of all tours up to the one that first covers them"""
    universe = set(universe)
    if not tours:
        if universe:
            raise TreeError("UNCOVERED", "no tours for a nonempty universe")
        return Concatenation([], [], 0.0)
    w = {v: float((weights or {}).get(v, 1.0)) for v in universe}
    total = sum(w.values())
    covered = [t.covers() & universe for t in tours]
    for a in range(1, len(tours)):
        if not covered[a - 1] <= covered[a]:
            raise TreeError("NOT_NESTED", f"tour {a - 1} covers nodes that tour {a} misses")
    if covered[-1] != universe:
        missing = sorted(universe - covered[-1])
        raise TreeError("UNCOVERED", f"last tour misses {missing}")

    mass = [sum(w[v] for v in s) for s in covered]
    best = [math.inf] * len(tours)
    back = [-1] * len(tours)
    for i, tour in enumerate(tours):
        best[i] = tour.closed_length * total
        for h in range(i):
            cand = best[h] + tour.closed_length * (total - mass[h])
            if cand < best[i] - 1e-12:
                best[i], back[i] = cand, h
    chosen = []
    i = len(tours) - 1
    while i >= 0:
        chosen.append(i)
        i = back[i]
    chosen.reverse()

    order: List[int] = []
    seen: Set[int] = set()
    for i in chosen:
        for v in tours[i].visited:
            if v not in seen:
                seen.add(v)
                order.append(v)
    return Concatenation(chosen, order, float(best[-1]))


def evaluate_order(
    metric: np.ndarray, root: int, order: Sequence[int], weights: Optional[Mapping[int, float]] = None
) -> Tuple[Dict[int, float], float]:
    """Arrival times along root -> order and their weighted sum"""
    tour = walk(metric, [root] + list(order))
    total = sum(float((weights or {}).get(v, 1.0)) * tour.arrival[v] for v in tour.visited)
    return tour.arrival, float(total)
