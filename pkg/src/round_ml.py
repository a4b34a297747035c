"""
Minimum-latency rounding

round_ml_lp1 reads nested tours off the alpha-points of the edge LP (random
alpha with density 2x, or alpha = 1/2 at doubling times) and concatenates
them; round_ml_lp2 samples path columns per doubling time and Eulerifies
their union.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set, Tuple, Union

import networkx as nx
import numpy as np

from .colgen import ColgenResult, FractionalLatency, PathColumn
from .config import RoundingConstants, Tolerances
from .errors import RoundingError
from .instance import write_rows
from .seeding import RngLike, as_rng
from .treekit import Tour, euler_tour, evaluate_order, gk_concatenate, mst, tree_from_graph

logger = logging.getLogger(__name__)


@dataclass
class AlphaPointTable:
    """tau_j(alpha) per client from the prefix sums of x"""

    frac: FractionalLatency

    def __post_init__(self):
        self._cum = self.frac.cumulative()

    def tau(self, v: int, alpha: float) -> float:
        hit = np.flatnonzero(self._cum[v] >= alpha - 1e-9)
        return float(self.frac.times[hit[0]]) if hit.size else float(self.frac.times[-1])

    def ready(self, t: float, alpha: float) -> List[int]:
        """D_t(alpha): clients whose alpha-point is at most t"""
        return [v for v in self.frac.clients if self.tau(v, alpha) <= t + 1e-9]


@dataclass
class TourRecord:
    time: float
    grid_index: int
    nodes: int
    closed_length: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.closed_length <= self.bound + Tolerances.CERTIFICATE


@dataclass
class MlLp1Report:
    mode: str
    alpha: float
    tours: List[TourRecord]
    nested: bool
    concat_bound: float
    latency: float
    lp_latency: float
    arrival: Dict[int, float]
    client_bound: Dict[int, float] = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.latency / self.lp_latency if self.lp_latency > 0 else 1.0

    @property
    def violations(self) -> List[str]:
        out = [
            f"tour at t={rec.time:g}: closed length {rec.closed_length:.6g} > {rec.bound:.6g}"
            for rec in self.tours
            if not rec.ok
        ]
        if not self.nested:
            out.append("tours are not nested")
        for v, bound in self.client_bound.items():
            if self.arrival[v] > bound + Tolerances.CERTIFICATE:
                out.append(f"client {v}: latency {self.arrival[v]:.6g} > {bound:.6g}")
        if self.mode == "random" and self.concat_bound < self.latency - Tolerances.CERTIFICATE:
            out.append(f"concatenation bound {self.concat_bound:.6g} below latency {self.latency:.6g}")
        return out

    def rows(self) -> List[List[str]]:
        rows = [["time", "grid_index", "nodes", "closed_length", "bound", "ok"]]
        for rec in self.tours:
            rows.append([f"{rec.time:.12g}", str(rec.grid_index), str(rec.nodes),
                         f"{rec.closed_length:.12g}", f"{rec.bound:.12g}", str(rec.ok)])
        return rows

    def write_csv(self, path: Union[str, Path]) -> None:
        write_rows(path, self.rows())


def _tour_on(metric: np.ndarray, root: int, nodes: Sequence[int], direction: str, weights) -> Tour:
    return euler_tour(mst(metric, nodes, root), metric, direction=direction, weights=weights)


def round_ml_lp1(
    metric: np.ndarray,
    root: int,
    frac: FractionalLatency,
    mode: str = "random",
    seed: RngLike = None,
) -> Tuple[List[int], MlLp1Report]:
    """Visiting order from an edge-LP point.

    ``random``: alpha drawn with density 2x, one MST tour per grid time on
    the clients whose alpha-point has passed, best subsequence by the nested
    tour concatenation. ``det``: alpha = 1/2, tours at t = 1, 2, 4, ...
    concatenated in full, each client within 32 tau_j(1/2).
    """
    if mode not in ("random", "det"):
        raise RoundingError("BAD_MODE", f"unknown mode {mode!r}", "use 'random' or 'det'")
    metric = np.asarray(metric, dtype=float)
    clients = frac.clients
    coverage = frac.x.sum(axis=1)
    short = [v for v in clients if coverage[v] < 1 - Tolerances.FEASIBILITY]
    if short:
        raise RoundingError("INFEASIBLE_FRAC", f"clients {short} are covered less than once")
    table = AlphaPointTable(frac)
    mass = frac.edge_mass(metric)
    weights = {v: frac.weight(v) for v in clients}
    times = frac.times

    if mode == "random":
        alpha = float(math.sqrt(as_rng(seed).uniform(0.0, 1.0)))
        alpha = max(alpha, 1e-12)
        checkpoints = list(range(len(times)))
        labels = [float(t) for t in times]
        direction = "forward"
    else:
        alpha = RoundingConstants.ML_DET_ALPHA
        labels, checkpoints = [], []
        top = max(table.tau(v, alpha) for v in clients) if clients else 1.0
        ell = 0
        while True:
            t = 2.0 ** ell
            labels.append(t)
            checkpoints.append(_floor_index(times, t))
            if t >= top - 1e-9:
                break
            ell += 1
        direction = "best"

    tours: List[Tour] = []
    records: List[TourRecord] = []
    sets: List[frozenset] = []
    last: Optional[frozenset] = None
    for label, r in zip(labels, checkpoints):
        ready = frozenset(table.ready(label, alpha))
        if not ready or (mode == "random" and ready == last):
            continue
        tour = _tour_on(metric, root, sorted(ready), direction, weights)
        tours.append(tour)
        sets.append(ready)
        records.append(TourRecord(label, r, len(ready), tour.closed_length, (4.0 / alpha) * float(mass[r])))
        last = ready
    nested = all(a <= b for a, b in zip(sets, sets[1:]))

    if mode == "random":
        concat = gk_concatenate(tours, clients, weights)
        order, bound = concat.order, concat.bound
    else:
        order, seen = [], set()
        for tour in tours:
            for v in tour.visited:
                if v not in seen:
                    seen.add(v)
                    order.append(v)
        bound = math.inf
    arrival, latency = evaluate_order(metric, root, order, weights)
    client_bound = {}
    if mode == "det":
        client_bound = {v: RoundingConstants.ML_DET_BOUND * table.tau(v, alpha) for v in clients}
    report = MlLp1Report(
        mode=mode,
        alpha=alpha,
        tours=records,
        nested=nested,
        concat_bound=bound,
        latency=latency,
        lp_latency=float(sum(weights[v] * frac.latency_star[v] for v in clients)),
        arrival=arrival,
        client_bound=client_bound,
    )
    logger.info("LP1 rounding (%s, alpha=%.4f): %d tour(s), latency %.6g", mode, alpha, len(tours), latency)
    if report.violations:
        logger.warning("LP1 rounding certificate violations: %s", report.violations)
    return order, report


def _floor_index(times: np.ndarray, t: float) -> int:
    below = np.flatnonzero(times <= t + 1e-12)
    return int(below[-1]) if below.size else 0


# ---------------------------------------------------------------------------
# Path-column rounding
# ---------------------------------------------------------------------------


def systematic_sample(values: Sequence[float], rng: RngLike = None) -> List[int]:
    """Indices hit by the points U, U+1, U+2, ... laid over the cumulative
    values; index c is picked with probability min(values[c], 1) and at most
    ceil(sum) indices are picked"""
    rng = as_rng(rng)
    u = float(rng.uniform(0.0, 1.0))
    picked: List[int] = []
    start = 0.0
    for c, value in enumerate(values):
        end = start + max(float(value), 0.0)
        # first point at or after start
        k = math.ceil(start - u - 1e-15)
        if u + k < end - 1e-15:
            picked.append(c)
        start = end
    return picked


@dataclass
class PhasePick:
    time: float
    grid_index: int
    mass: float
    picked: List[int]
    covered: int


@dataclass
class MlLp2Report:
    success: bool
    phases: List[PhasePick]
    latency: float
    uncovered: List[int]

    def rows(self) -> List[List[str]]:
        rows = [["time", "grid_index", "mass", "picked", "covered"]]
        for ph in self.phases:
            rows.append([f"{ph.time:.12g}", str(ph.grid_index), f"{ph.mass:.12g}",
                         " ".join(map(str, ph.picked)), str(ph.covered)])
        return rows

    def write_csv(self, path: Union[str, Path]) -> None:
        write_rows(path, self.rows())


def _column_edges(metric: np.ndarray, root: int, column: PathColumn, mode: str) -> List[Tuple[int, int]]:
    if mode == "tree":
        return [(u, v) for u, v, _ in mst(metric, column.nodes, root).edges()]
    return list(zip(column.nodes, column.nodes[1:]))


def round_ml_lp2(
    metric: np.ndarray,
    root: int,
    result: ColgenResult,
    seed: RngLike = None,
    mode: str = "path",
    groups: Optional[Sequence[Sequence[int]]] = None,
    weights: Optional[Sequence[float]] = None,
) -> Tuple[List[int], MlLp2Report]:
    """At t = 1, 2, 4, ... pick columns of that time by systematic sampling,
    Eulerify the union of their edges and append the tour"""
    metric = np.asarray(metric, dtype=float)
    rng = as_rng(seed)
    times = result.ts.as_array()
    by_time: Dict[int, List[Tuple[int, float]]] = {}
    for c, (column, value) in enumerate(zip(result.columns, result.z)):
        if value > 1e-12:
            by_time.setdefault(column.time_index, []).append((c, float(value)))

    phases: List[PhasePick] = []
    order: List[int] = []
    seen: Set[int] = set()
    used: Set[int] = set()
    ell = 0
    while True:
        t = 2.0 ** ell
        r = _floor_index(times, t)
        if r not in used:
            used.add(r)
            pool = by_time.get(r, [])
            hits = systematic_sample([value for _, value in pool], rng)
            picked = [pool[h][0] for h in hits]
            graph = nx.Graph()
            graph.add_node(root)
            for c in picked:
                for u, v in _column_edges(metric, root, result.columns[c], mode):
                    graph.add_edge(u, v, weight=float(metric[u, v]))
            tour = euler_tour(tree_from_graph(graph, root), metric)
            for v in tour.visited:
                if v not in seen:
                    seen.add(v)
                    order.append(v)
            phases.append(PhasePick(float(times[r]), r, sum(v for _, v in pool), picked, len(seen)))
        if t >= times[-1]:
            break
        ell += 1

    size = metric.shape[0]
    if groups is None:
        targets = [v for v in range(size) if v != root]
        uncovered = [v for v in targets if v not in seen]
        w = {v: 1.0 if weights is None else float(weights[v]) for v in targets}
        _, latency = evaluate_order(metric, root, order, w) if not uncovered else (None, math.inf)
    else:
        uncovered = [g for g, grp in enumerate(groups) if not set(grp) & seen]
        latency = math.inf
        if not uncovered:
            arrival, _ = evaluate_order(metric, root, order)
            latency = float(sum(
                (1.0 if weights is None else float(weights[g])) * min(arrival[v] for v in grp if v in arrival)
                for g, grp in enumerate(groups)
            ))
    report = MlLp2Report(not uncovered, phases, latency, uncovered)
    if uncovered:
        logger.info("LP2 rounding left %d target(s) uncovered", len(uncovered))
    return order, report
