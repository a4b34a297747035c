"""
Exact oracles for small instances

Ground truth for the relaxations and roundings: MLUFL by depth-first search
over visiting orders, minimum (group) latency by a bitmask dynamic program,
min-sum set cover by exhaustive search and UFL by subset enumeration.
"""

import itertools
import logging
import math
import time
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ExactLimitError
from .instance import INF, Instance, Solution, best_assignment, evaluate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExactLimits:
    mlufl_facilities: int = 8
    ml_dp_nodes: int = 14
    ml_permutation_nodes: int = 9
    mssc_sets: int = 8
    ufl_facilities: int = 16
    time_budget: Optional[float] = None

    def check(self, what: str, size: int, cap: int) -> None:
        if size > cap:
            raise ExactLimitError(
                "OVER_LIMIT",
                f"{what}: size {size} exceeds the exact limit {cap}",
                "use a smaller instance or raise the limit",
            )


class _Clock:
    def __init__(self, budget: Optional[float]):
        self.budget = budget
        self.start = time.monotonic()

    def tick(self) -> None:
        if self.budget is not None and time.monotonic() - self.start > self.budget:
            raise ExactLimitError("TIME_BUDGET", f"exact search exceeded {self.budget:g}s")


# ---------------------------------------------------------------------------
# MLUFL
# ---------------------------------------------------------------------------


@dataclass
class ExactResult:
    value: float
    solution: Optional[Solution]
    explored: int = 0


def exact_mlufl(
    inst: Instance, limits: ExactLimits = ExactLimits(), full_enumeration: bool = False
) -> ExactResult:
    """Optimum over single routes by depth-first search on visiting orders.

    Appending a facility is skipped when it improves the clients by no more
    than its opening cost, and subtrees are cut with a lower bound from the
    cheapest remaining service per client; ``full_enumeration`` turns both off.
    """
    limits.check("exact_mlufl facilities", inst.n, limits.mlufl_facilities)
    if inst.route_count != 1:
        raise ExactLimitError("UNSUPPORTED", "exact_mlufl handles a single route only")
    clock = _Clock(limits.time_budget)
    n, m = inst.n, inst.m
    d, c = inst.time_metric, inst.connection_cost
    weight = inst.client_weight
    budget = inst.route_budget

    def serve(i: int, t: float) -> np.ndarray:
        return c[i] + weight * inst.latency(t)

    best_value = INF
    best_seq: List[int] = []
    explored = 0

    def dfs(seq: List[int], elapsed: float, fac: float, best: np.ndarray) -> None:
        nonlocal best_value, best_seq, explored
        explored += 1
        if explored % 4096 == 0:
            clock.tick()
        total = fac + float(best.sum())
        if seq and total < best_value - 1e-12:
            best_value, best_seq = total, list(seq)
        last = seq[-1] if seq else inst.root
        rest = [i for i in range(n) if i not in seq]
        if not rest:
            return
        if not full_enumeration:
            reach = np.array([elapsed + d[last, i] for i in rest])
            cheapest = np.min(np.stack([serve(i, t) for i, t in zip(rest, reach)]), axis=0)
            if fac + float(np.minimum(best, cheapest).sum()) >= best_value - 1e-12:
                return
        for i in rest:
            t = elapsed + float(d[last, i])
            if t > budget + 1e-9:
                continue
            improved = np.minimum(best, serve(i, t))
            gain = float((best - improved)[np.isfinite(best)].sum()) if np.all(np.isfinite(best)) else INF
            if not full_enumeration and gain <= inst.facility_cost[i]:
                continue
            seq.append(i)
            dfs(seq, t, fac + float(inst.facility_cost[i]), improved)
            seq.pop()

    dfs([], 0.0, 0.0, np.full(m, INF))
    if not best_seq:
        return ExactResult(INF, None, explored)
    solution = Solution([best_seq], best_assignment(inst, [best_seq]))
    value = evaluate(inst, solution).total
    logger.debug("exact MLUFL optimum %.9g after %d nodes", value, explored)
    return ExactResult(value, solution, explored)


# ---------------------------------------------------------------------------
# Minimum latency / minimum group latency
# ---------------------------------------------------------------------------


def _ml_setup(metric, root, groups, weights):
    metric = np.asarray(metric, dtype=float)
    others = [v for v in range(metric.shape[0]) if v != root]
    if groups is None:
        w = np.ones(len(others)) if weights is None else np.array([float(weights[v]) for v in others])
    else:
        w = np.ones(len(groups)) if weights is None else np.array([float(x) for x in weights])
    return metric, others, w


def _remaining(others, groups, w, root) -> np.ndarray:
    """Uncovered weight for every visited-set bitmask"""
    size = 1 << len(others)
    rem = np.zeros(size)
    if groups is None:
        for mask in range(size):
            rem[mask] = w.sum() - sum(w[k] for k in range(len(others)) if mask >> k & 1)
        return rem
    for mask in range(size):
        seen = {root} | {others[k] for k in range(len(others)) if mask >> k & 1}
        rem[mask] = sum(w[g] for g, grp in enumerate(groups) if not seen & set(grp))
    return rem


def exact_ml(
    metric: np.ndarray,
    root: int,
    groups: Optional[Sequence[Sequence[int]]] = None,
    weights: Optional[Sequence[float]] = None,
    limits: ExactLimits = ExactLimits(),
) -> Tuple[float, List[int]]:
    """Minimum (group) latency by DP over (visited set, last node): moving
    along an edge costs its length times the weight still uncovered"""
    metric, others, w = _ml_setup(metric, root, groups, weights)
    N = len(others)
    limits.check("exact_ml nodes", N, limits.ml_dp_nodes)
    rem = _remaining(others, groups, w, root)
    if rem[0] <= 0:
        return 0.0, []
    D = metric[np.ix_(others, others)]
    start = metric[root, others]
    full = (1 << N) - 1
    dp = np.full((1 << N, N), INF)
    parent = np.full((1 << N, N), -1, dtype=int)
    for k in range(N):
        dp[1 << k, k] = start[k] * rem[0]
    best_value, best_state = INF, None
    for mask in range(1, full + 1):
        row = dp[mask]
        if not np.isfinite(row).any():
            continue
        if rem[mask] <= 0:
            k = int(np.argmin(row))
            if row[k] < best_value - 1e-12:
                best_value, best_state = float(row[k]), (mask, k)
            continue
        cand = row[:, None] + D * rem[mask]
        last = np.argmin(cand, axis=0)
        values = cand[last, np.arange(N)]
        for j in range(N):
            if mask >> j & 1:
                continue
            nxt = mask | (1 << j)
            if values[j] < dp[nxt, j] - 1e-12:
                dp[nxt, j] = values[j]
                parent[nxt, j] = last[j]
    if best_state is None:
        return INF, []
    order = []
    mask, k = best_state
    while k >= 0:
        order.append(others[k])
        prev = parent[mask, k]
        mask ^= 1 << k
        k = int(prev)
    order.reverse()
    return best_value, order


def ml_latency(
    metric: np.ndarray,
    root: int,
    order: Sequence[int],
    groups: Optional[Sequence[Sequence[int]]] = None,
    weights: Optional[Sequence[float]] = None,
) -> float:
    """Sum of (weighted) first-visit times of nodes, or of groups"""
    metric = np.asarray(metric, dtype=float)
    arrival = {root: 0.0}
    elapsed, prev = 0.0, root
    for v in order:
        elapsed += float(metric[prev, v])
        arrival.setdefault(v, elapsed)
        prev = v
    total = 0.0
    if groups is None:
        for v in range(metric.shape[0]):
            if v != root:
                total += (1.0 if weights is None else float(weights[v])) * arrival.get(v, INF)
        return total
    for g, grp in enumerate(groups):
        hit = min((arrival[v] for v in grp if v in arrival), default=INF)
        total += (1.0 if weights is None else float(weights[g])) * hit
    return total


def exact_ml_permutations(
    metric: np.ndarray,
    root: int,
    groups: Optional[Sequence[Sequence[int]]] = None,
    weights: Optional[Sequence[float]] = None,
    limits: ExactLimits = ExactLimits(),
) -> Tuple[float, List[int]]:
    metric, others, _ = _ml_setup(metric, root, groups, weights)
    limits.check("exact_ml_permutations nodes", len(others), limits.ml_permutation_nodes)
    best_value, best_order = INF, []
    for perm in itertools.permutations(others):
        value = ml_latency(metric, root, perm, groups, weights)
        if value < best_value - 1e-12:
            best_value, best_order = value, list(perm)
    return best_value, best_order


# ---------------------------------------------------------------------------
# Min-sum set cover
# ---------------------------------------------------------------------------


def mssc_cost(sets: Sequence[Iterable], order: Sequence[int]) -> float:
    """Sum over elements of the position (from 1) of the first covering set"""
    universe = set().union(*[set(s) for s in sets]) if sets else set()
    cost, covered = 0, set()
    for pos, s in enumerate(order, start=1):
        new = set(sets[s]) - covered
        cost += pos * len(new)
        covered |= new
    if covered != universe:
        return INF
    return float(cost)


def exact_mssc(sets: Sequence[Iterable], limits: ExactLimits = ExactLimits()) -> Tuple[float, List[int]]:
    limits.check("exact_mssc sets", len(sets), limits.mssc_sets)
    family = [frozenset(s) for s in sets]
    universe = frozenset().union(*family) if family else frozenset()
    best_value, best_order = INF, []

    def dfs(order: List[int], covered: frozenset, cost: int) -> None:
        nonlocal best_value, best_order
        if covered == universe:
            if cost < best_value:
                best_value, best_order = cost, list(order)
            return
        if cost + (len(order) + 1) * len(universe - covered) >= best_value:
            return
        for s, members in enumerate(family):
            new = members - covered
            if s in order or not new:
                continue
            order.append(s)
            dfs(order, covered | new, cost + len(order) * len(new))
            order.pop()

    dfs([], frozenset(), 0)
    rest = [s for s in range(len(family)) if s not in best_order]
    return float(best_value), best_order + rest


# ---------------------------------------------------------------------------
# UFL
# ---------------------------------------------------------------------------


@dataclass
class UflResult:
    value: float
    open_set: List[int]
    assignment: List[int]


def exact_ufl(
    inst: Instance, cardinality: Optional[int] = None, limits: ExactLimits = ExactLimits()
) -> UflResult:
    """Cheapest open set (at most ``cardinality`` facilities) ignoring latency"""
    n, m = inst.n, inst.m
    limits.check("exact_ufl facilities", n, limits.ufl_facilities)
    c = np.asarray(inst.connection_cost, dtype=float)
    f = np.asarray(inst.facility_cost, dtype=float)
    size = 1 << n
    service = np.full((size, m), INF)
    opening = np.zeros(size)
    count = np.zeros(size, dtype=int)
    best_value, best_mask = INF, 0
    for mask in range(1, size):
        low = (mask & -mask).bit_length() - 1
        prev = mask & (mask - 1)
        service[mask] = np.minimum(service[prev], c[low])
        opening[mask] = opening[prev] + f[low]
        count[mask] = count[prev] + 1
        if cardinality is not None and count[mask] > cardinality:
            continue
        value = opening[mask] + float(service[mask].sum())
        if value < best_value - 1e-12:
            best_value, best_mask = value, mask
    if not math.isfinite(best_value):
        return UflResult(INF, [], [])
    open_set = [i for i in range(n) if best_mask >> i & 1]
    assignment = [min(open_set, key=lambda i: (c[i, j], i)) for j in range(m)]
    return UflResult(float(best_value), open_set, assignment)
