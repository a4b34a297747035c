"""
Minimum-latency relaxations on a metric with a root

- build_ml_lp1: edge-based LP with per-(node, time) cut separation
- orienteering_exact: exhaustive reward-maximising path or tree
- solve_ml_lp2_colgen: path-based LP solved by column generation, the
  pricing problem being exact orienteering

Nodes are the indices of ``metric``; every node other than ``root`` is a
client unless ``groups`` is given, in which case each group is a client
covered by its first visited member.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from .config import Config, Tolerances
from .errors import ExactLimitError
from .lpcore import (
    Constraint,
    FlowNetwork,
    LpModel,
    LpSolution,
    LpStatus,
    Sense,
    cutting_plane_solve,
    max_flow,
    solve_lp,
)
from .relaxations import TimeScale, charge_times, is_integral_metric
from .treekit import mst

logger = logging.getLogger(__name__)


def metric_timescale(metric: np.ndarray, root: int, epsilon: Optional[float] = None) -> TimeScale:
    """Grid reaching (number of clients) * (largest distance)"""
    eps = Config.EPSILON if epsilon is None else epsilon
    size = metric.shape[0]
    return TimeScale.build(max(size - 1, 1) * float(metric.max()), eps)


def _clients(size: int, root: int) -> List[int]:
    return [v for v in range(size) if v != root]


# ---------------------------------------------------------------------------
# Edge-based LP
# ---------------------------------------------------------------------------


@dataclass
class FractionalLatency:
    """x[v, r]: node v first reached by grid time r; z[e, r]: edge mass at r"""

    times: np.ndarray
    x: np.ndarray
    edges: List[Tuple[int, int]]
    z: np.ndarray
    root: int
    weights: Optional[np.ndarray] = None

    @property
    def clients(self) -> List[int]:
        return _clients(self.x.shape[0], self.root)

    def weight(self, v: int) -> float:
        return 1.0 if self.weights is None else float(self.weights[v])

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.x, axis=1)

    def alpha_point(self, v: int, alpha: float) -> float:
        """Smallest grid time by which v's coverage reaches alpha"""
        cum = self.cumulative()[v]
        hit = np.flatnonzero(cum >= alpha - 1e-9)
        return float(self.times[hit[0]]) if hit.size else float(self.times[-1])

    @property
    def latency_star(self) -> np.ndarray:
        return self.x @ self.times

    def edge_mass(self, metric: np.ndarray) -> np.ndarray:
        """Sum of d_e z_e per grid time"""
        lengths = np.array([metric[u, v] for u, v in self.edges])
        return lengths @ self.z if self.edges else np.zeros(len(self.times))

    @classmethod
    def from_order(cls, metric: np.ndarray, root: int, order: Sequence[int], ts: TimeScale) -> "FractionalLatency":
        """Integral point of a visiting order"""
        size = metric.shape[0]
        edges = list(itertools.combinations(range(size), 2))
        position = {e: k for k, e in enumerate(edges)}
        x = np.zeros((size, len(ts)))
        z = np.zeros((len(edges), len(ts)))
        elapsed, prev = 0.0, root
        for v in order:
            elapsed += float(metric[prev, v])
            r = ts.index_of(elapsed)
            x[v, r] = 1.0
            z[position[tuple(sorted((prev, v)))], r:] += 1.0
            prev = v
        return cls(ts.as_array(), x, edges, z, root)


class MlCutOracle:
    """Every cut separating the root from v carries v's coverage so far"""

    def __init__(self, metric: np.ndarray, root: int, ts: TimeScale):
        self.metric = metric
        self.root = root
        self.ts = ts
        self.edges = list(itertools.combinations(range(metric.shape[0]), 2))

    def __call__(self, model: LpModel, solution: LpSolution) -> List[Constraint]:
        values = solution.values
        size = self.metric.shape[0]
        cuts = []
        for r in range(len(self.ts)):
            z_cols = {e: model.var("z", (e[0], e[1], r)) for e in self.edges}
            for v in _clients(size, self.root):
                cols = [model.var("x", (v, q)) for q in range(r + 1)]
                cols = [k for k in cols if k is not None]
                demand = float(sum(values[k] for k in cols))
                if demand <= Tolerances.CUT_VIOLATION:
                    continue
                net = FlowNetwork(list(range(size)), [], self.root, v)
                for (a, b), k in z_cols.items():
                    if values[k] > 0:
                        net.add_undirected(a, b, float(values[k]))
                flow = max_flow(net)
                if demand - flow.value <= Tolerances.CUT_VIOLATION:
                    continue
                inside = set(range(size)) - set(flow.source_side)
                row = {k: 1.0 for (a, b), k in z_cols.items() if (a in inside) != (b in inside)}
                for k in cols:
                    row[k] = row.get(k, 0.0) - 1.0
                cuts.append(Constraint(row, Sense.GE, 0.0, f"mlcut_{v}_t{r}"))
        return cuts


def build_ml_lp1(
    metric: np.ndarray,
    root: int,
    ts: TimeScale,
    route_count: int = 1,
    weights: Optional[np.ndarray] = None,
) -> Tuple[LpModel, MlCutOracle]:
    metric = np.asarray(metric, dtype=float)
    size = metric.shape[0]
    charge = charge_times(ts, metric[root], is_integral_metric(metric))
    model = LpModel("ml_lp1")
    for v in _clients(size, root):
        w = 1.0 if weights is None else float(weights[v])
        for r, t in enumerate(ts.times):
            if metric[root, v] <= t + Tolerances.METRIC:
                model.add_variable("x", (v, r), cost=w * float(charge[v, r]))
    edges = list(itertools.combinations(range(size), 2))
    for r in range(len(ts)):
        for a, b in edges:
            model.add_variable("z", (a, b, r))
    for v in _clients(size, root):
        cols = [model.var("x", (v, r)) for r in range(len(ts))]
        model.add_constraint({k: 1.0 for k in cols if k is not None}, Sense.GE, 1.0, f"cover_{v}")
    for r, t in enumerate(ts.times):
        row = {model.var("z", (a, b, r)): float(metric[a, b]) for a, b in edges if metric[a, b] > 0}
        model.add_constraint(row, Sense.LE, route_count * float(t), f"length_{r}")
    return model, MlCutOracle(metric, root, ts)


def solve_ml_lp1(
    metric: np.ndarray,
    root: int,
    ts: TimeScale,
    route_count: int = 1,
    weights: Optional[np.ndarray] = None,
    max_rounds: Optional[int] = None,
) -> Tuple[LpSolution, Optional[FractionalLatency]]:
    model, oracle = build_ml_lp1(metric, root, ts, route_count, weights)
    solution = cutting_plane_solve(model, oracle, max_rounds)
    if not solution.is_optimal:
        return solution, None
    size = metric.shape[0]
    x = np.zeros((size, len(ts)))
    for (v, r), value in solution.block_values("x").items():
        x[v, r] = max(value, 0.0)
    edges = list(itertools.combinations(range(size), 2))
    position = {e: k for k, e in enumerate(edges)}
    z = np.zeros((len(edges), len(ts)))
    for (a, b, r), value in solution.block_values("z").items():
        z[position[(a, b)], r] = max(value, 0.0)
    return solution, FractionalLatency(ts.as_array(), x, edges, z, root, weights)


def exhaustive_ml_cut_violations(
    metric: np.ndarray, frac: FractionalLatency, tol: float = Tolerances.CUT_VIOLATION
) -> List[Tuple[int, float, Tuple[int, ...], float]]:
    size = metric.shape[0]
    others = _clients(size, frac.root)
    cum = frac.cumulative()
    found = []
    for r, t in enumerate(frac.times):
        z = {e: frac.z[k, r] for k, e in enumerate(frac.edges)}
        for count in range(1, len(others) + 1):
            for S in itertools.combinations(others, count):
                inside = set(S)
                crossing = sum(val for (a, b), val in z.items() if (a in inside) != (b in inside))
                for v in S:
                    if cum[v, r] - crossing > tol:
                        found.append((v, float(t), S, float(cum[v, r] - crossing)))
    return found


# ---------------------------------------------------------------------------
# Orienteering
# ---------------------------------------------------------------------------


@dataclass
class OrienteeringResult:
    nodes: List[int]
    length: float
    reward: float
    covered: frozenset = frozenset()


def orienteering_exact(
    metric: np.ndarray,
    root: int,
    rewards: Sequence[float],
    budget: float,
    mode: str = "path",
    groups: Optional[Sequence[Sequence[int]]] = None,
    limit: Optional[int] = None,
) -> OrienteeringResult:
    """Reward-maximal rooted path (or tree) of length at most ``budget``.

    ``rewards`` is indexed by node, or by group when ``groups`` is given.
    Ties go to the shorter column, then the lexicographically smaller one.
    """
    limit = Config.ORIENTEERING_LIMIT if limit is None else limit
    metric = np.asarray(metric, dtype=float)
    size = metric.shape[0]
    rewards = [float(v) for v in rewards]
    tol = 1e-12

    if groups is None:
        member_of = {v: [v] for v in range(size)}
        candidates = [v for v in range(size) if v != root and rewards[v] > tol]
    else:
        member_of = {v: [g for g, grp in enumerate(groups) if v in grp] for v in range(size)}
        useful = {g for g, w in enumerate(rewards) if w > tol}
        candidates = [v for v in range(size) if v != root and any(g in useful for g in member_of[v])]
    if len(candidates) > limit:
        raise ExactLimitError(
            "ORIENTEERING_LIMIT",
            f"{len(candidates)} candidate nodes exceed the exhaustive limit {limit}",
            "raise MLUFL_ORIENTEERING_LIMIT or use a smaller instance",
        )

    def gain(covered: Set[int], v: int) -> float:
        return sum(rewards[c] for c in member_of[v] if c not in covered)

    start_cov = set(member_of[root])
    start_reward = sum(rewards[c] for c in start_cov)
    best = OrienteeringResult([root], 0.0, start_reward, frozenset(start_cov))

    def better(reward: float, length: float, nodes: List[int]) -> bool:
        if reward > best.reward + 1e-12:
            return True
        if reward < best.reward - 1e-12:
            return False
        if length < best.length - 1e-12:
            return True
        return length <= best.length + 1e-12 and nodes < best.nodes

    if mode == "path":

        def dfs(path: List[int], length: float, covered: Set[int], reward: float, left: List[int]) -> None:
            nonlocal best
            if better(reward, length, path):
                best = OrienteeringResult(list(path), length, reward, frozenset(covered))
            optimistic = reward + sum(
                rewards[c] for c in {c for v in left for c in member_of[v]} if c not in covered
            )
            if optimistic < best.reward - 1e-12:
                return
            for v in left:
                step = length + float(metric[path[-1], v])
                if step > budget + 1e-9:
                    continue
                extra = set(member_of[v]) - covered
                path.append(v)
                dfs(
                    path,
                    step,
                    covered | extra,
                    reward + sum(rewards[c] for c in extra),
                    [u for u in left if u != v],
                )
                path.pop()

        dfs([root], 0.0, set(start_cov), start_reward, candidates)
        return best

    if mode != "tree":
        raise ValueError(f"unknown orienteering mode {mode!r}")
    for count in range(1, len(candidates) + 1):
        for subset in itertools.combinations(candidates, count):
            covered = set(start_cov)
            for v in subset:
                covered.update(member_of[v])
            reward = sum(rewards[c] for c in covered)
            if reward < best.reward - 1e-12:
                continue
            tree = mst(metric, subset, root)
            length = tree.total_weight
            if length > budget + 1e-9:
                continue
            nodes = [v for v in tree.preorder()]
            if better(reward, length, nodes):
                best = OrienteeringResult(nodes, length, reward, frozenset(covered))
    return best


# ---------------------------------------------------------------------------
# Path-based LP by column generation
# ---------------------------------------------------------------------------


@dataclass
class PathColumn:
    nodes: Tuple[int, ...]
    length: float
    time_index: int
    coverage: frozenset

    def key(self) -> Tuple:
        return (self.time_index, self.nodes)


@dataclass
class ColgenResult:
    status: LpStatus
    value: float
    lower_bound: float
    x: np.ndarray
    columns: List[PathColumn]
    z: np.ndarray
    ts: TimeScale
    iterations: int
    solution: Optional[LpSolution] = None
    duals: Dict[str, np.ndarray] = field(default_factory=dict)

    def active(self, tol: float = 1e-9) -> List[Tuple[PathColumn, float]]:
        return [(c, float(v)) for c, v in zip(self.columns, self.z) if v > tol]


def _nearest_neighbour(metric: np.ndarray, root: int, nodes: Sequence[int]) -> List[int]:
    path, left = [root], sorted(nodes)
    while left:
        nxt = min(left, key=lambda v: (metric[path[-1], v], v))
        path.append(nxt)
        left.remove(nxt)
    return path


def _path_length(metric: np.ndarray, nodes: Sequence[int]) -> float:
    return float(sum(metric[a, b] for a, b in zip(nodes, nodes[1:])))


class _Master:
    """Restricted master problem over the current column pool"""

    def __init__(self, metric, root, ts, a, groups, weights):
        self.metric = metric
        self.root = root
        self.ts = ts
        self.a = a
        self.groups = groups
        size = metric.shape[0]
        self.targets = list(range(len(groups))) if groups is not None else _clients(size, root)
        if groups is None:
            root_dist = metric[root, self.targets]
        else:
            root_dist = np.array([min(metric[root, v] for v in grp) for grp in groups])
        self.root_dist = root_dist
        self.charge = charge_times(ts, root_dist, is_integral_metric(metric))
        self.weights = weights
        self.columns: List[PathColumn] = []
        self._keys: Set[Tuple] = set()

    def coverage_of(self, nodes: Sequence[int]) -> frozenset:
        if self.groups is None:
            return frozenset(v for v in nodes if v != self.root)
        return frozenset(g for g, grp in enumerate(self.groups) if set(grp) & set(nodes))

    def add(self, nodes: Sequence[int], length: float, r: int) -> bool:
        column = PathColumn(tuple(int(v) for v in nodes), float(length), r, self.coverage_of(nodes))
        if column.key() in self._keys:
            return False
        self._keys.add(column.key())
        self.columns.append(column)
        return True

    def weight(self, target: int) -> float:
        if self.weights is None:
            return 1.0
        return float(self.weights[target])

    def build(self) -> LpModel:
        model = LpModel("ml_lp2")
        T = len(self.ts)
        for q, target in enumerate(self.targets):
            for r, t in enumerate(self.ts.times):
                if self.root_dist[q] <= t + Tolerances.METRIC:
                    model.add_variable("x", (target, r), cost=self.weight(target) * float(self.charge[q, r]))
        for c, column in enumerate(self.columns):
            model.add_variable("z", (c,))
        for target in self.targets:
            cols = [model.var("x", (target, r)) for r in range(T)]
            model.add_constraint({k: 1.0 for k in cols if k is not None}, Sense.GE, 1.0, f"cover_{target}")
        for r in range(T):
            row = {model.var("z", (c,)): 1.0 for c, col in enumerate(self.columns) if col.time_index == r}
            model.add_constraint(row, Sense.LE, float(self.a), f"onepath_{r}")
        for r in range(T):
            for target in self.targets:
                row: Dict[int, float] = {
                    model.var("z", (c,)): 1.0
                    for c, col in enumerate(self.columns)
                    if col.time_index == r and target in col.coverage
                }
                for q in range(r + 1):
                    k = model.var("x", (target, q))
                    if k is not None:
                        row[k] = -1.0
                model.add_constraint(row, Sense.GE, 0.0, f"jcov_{target}_{r}")
        return model


def _duals(master: _Master, solution: LpSolution) -> Tuple[np.ndarray, np.ndarray]:
    """beta_r and theta[target, r] read from the master's row duals"""
    T = len(master.ts)
    count = len(master.targets)
    offset = count
    beta = np.array([-solution.duals[offset + r] for r in range(T)])
    theta = np.zeros((count, T))
    offset += T
    for r in range(T):
        for q in range(count):
            theta[q, r] = max(float(solution.duals[offset + r * count + q]), 0.0)
    return np.maximum(beta, 0.0), theta


def _price(master: _Master, theta: np.ndarray, r: int, b: float, mode: str, limit: Optional[int]):
    size = master.metric.shape[0]
    if master.groups is None:
        rewards = np.zeros(size)
        for q, target in enumerate(master.targets):
            rewards[target] = theta[q, r]
        return orienteering_exact(master.metric, master.root, rewards, b * master.ts.times[r], mode, None, limit)
    return orienteering_exact(
        master.metric, master.root, theta[:, r], b * master.ts.times[r], mode, master.groups, limit
    )


def solve_ml_lp2_colgen(
    metric: np.ndarray,
    root: int,
    ts: TimeScale,
    a: int = 1,
    b: float = 1.0,
    mode: str = "path",
    groups: Optional[Sequence[Sequence[int]]] = None,
    weights: Optional[np.ndarray] = None,
    max_columns: Optional[int] = None,
    limit: Optional[int] = None,
) -> ColgenResult:
    """Column generation: price one column per grid time while some
    column's collected dual reward exceeds the time's path-count dual"""
    metric = np.asarray(metric, dtype=float)
    max_columns = Config.COLGEN_MAX_COLUMNS if max_columns is None else max_columns
    master = _Master(metric, root, ts, a, groups, weights)
    size = metric.shape[0]
    every = _clients(size, root)

    for r, t in enumerate(ts.times):
        for v in every:
            if metric[root, v] <= b * t + Tolerances.METRIC:
                master.add([root, v], float(metric[root, v]), r)
    full = _nearest_neighbour(metric, root, every)
    full_length = _path_length(metric, full)
    for r, t in enumerate(ts.times):
        if full_length <= b * t + Tolerances.METRIC:
            master.add(full, full_length, r)

    iterations = 0
    while True:
        iterations += 1
        model = master.build()
        solution = solve_lp(model)
        if not solution.is_optimal:
            logger.warning("restricted master ended with status %s", solution.status.value)
            return _result(master, solution, solution.status, math.nan, iterations)
        beta, theta = _duals(master, solution)
        added = 0
        gap = 0.0
        for r in range(len(ts)):
            best = _price(master, theta, r, b, mode, limit)
            excess = best.reward - beta[r]
            if excess > Tolerances.DUAL:
                gap += excess
                if master.add(best.nodes, best.length, r):
                    added += 1
        logger.debug(
            "colgen iteration %d: value %.9g, %d column(s) added, pool %d",
            iterations, solution.objective, added, len(master.columns),
        )
        if added == 0:
            return _result(master, solution, LpStatus.OPTIMAL, solution.objective, iterations)
        if len(master.columns) >= max_columns:
            lower = solution.objective - a * gap
            logger.warning("column cap %d reached; bracket [%.6g, %.6g]", max_columns, lower, solution.objective)
            model = master.build()
            solution = solve_lp(model)
            return _result(master, solution, LpStatus.PARTIAL, lower, iterations)


def _result(master: _Master, solution: LpSolution, status: LpStatus, lower: float, iterations: int) -> ColgenResult:
    size = master.metric.shape[0]
    rows = len(master.groups) if master.groups is not None else size
    x = np.zeros((rows, len(master.ts)))
    z = np.zeros(len(master.columns))
    if solution.is_optimal:
        for (target, r), value in solution.block_values("x").items():
            x[target, r] = max(value, 0.0)
        for (c,), value in solution.block_values("z").items():
            z[c] = max(value, 0.0)
    duals = {}
    if solution.is_optimal:
        beta, theta = _duals(master, solution)
        duals = {"beta": beta, "theta": theta}
    return ColgenResult(
        status=status,
        value=solution.objective if solution.is_optimal else math.inf,
        lower_bound=lower if status != LpStatus.OPTIMAL else solution.objective,
        x=x,
        columns=list(master.columns),
        z=z,
        ts=master.ts,
        iterations=iterations,
        solution=solution,
        duals=duals,
    )


def max_pricing_violation(
    metric: np.ndarray,
    root: int,
    result: ColgenResult,
    b: float = 1.0,
    mode: str = "path",
    groups: Optional[Sequence[Sequence[int]]] = None,
    limit: Optional[int] = None,
) -> float:
    """Largest reduced-cost violation over every (time, column), re-priced exactly"""
    if not result.duals:
        return math.inf
    master = _Master(np.asarray(metric, dtype=float), root, result.ts, 1, groups, None)
    beta, theta = result.duals["beta"], result.duals["theta"]
    worst = 0.0
    for r in range(len(result.ts)):
        best = _price(master, theta, r, b, mode, limit)
        worst = max(worst, best.reward - beta[r])
    return worst
