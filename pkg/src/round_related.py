"""
Deterministic rounding for related MLUFL (d = c / M on a common metric)

Per phase t = 2^l the clients with tau_j <= t are clustered greedily by C*_j,
the neighbourhoods of the centres are contracted and joined to the root by a
minimum spanning tree, and each centre is wired to the facilities of its
neighbourhood used by that tree. A maximal disjoint set of centres over all
phases opens its cheapest facility, attached to the earliest phase tree with
a centre it absorbed. Trees become tours, concatenated in phase order.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Set, Tuple, Union

import networkx as nx
import numpy as np

from .config import RoundingConstants, Tolerances
from .errors import RoundingError
from .instance import Instance, Solution, write_rows
from .relaxations import FractionalMlufl
from .treekit import euler_tour, tree_from_graph

logger = logging.getLogger(__name__)


def greedy_cluster(
    clients: Sequence[int],
    keys: Sequence[float],
    dist: Callable[[int, int], float],
    radius_fn: Callable[[int], float],
) -> Tuple[List[int], Dict[int, int]]:
    """Pick the client with the smallest key as a centre, absorb every
    remaining client k with dist(centre, k) <= radius_fn(k), repeat"""
    remaining = sorted(clients, key=lambda j: (keys[j], j))
    centers: List[int] = []
    sigma: Dict[int, int] = {}
    while remaining:
        center = remaining[0]
        centers.append(center)
        kept = []
        for k in remaining:
            if k == center or dist(center, k) <= radius_fn(k) + Tolerances.CERTIFICATE:
                sigma[k] = center
            else:
                kept.append(k)
        remaining = kept
    return centers, sigma


@dataclass
class RelatedPhase:
    phase: int
    target: float
    centers: List[int]
    steiner_length: float = 0.0
    tree_length: float = 0.0
    augmented_length: float = 0.0
    degree: Dict[int, int] = field(default_factory=dict)
    tour: List[int] = field(default_factory=list)

    @property
    def steiner_ok(self) -> bool:
        return self.steiner_length <= RoundingConstants.RELATED_STEINER_BOUND * self.target + Tolerances.CERTIFICATE

    @property
    def tree_ok(self) -> bool:
        return self.tree_length <= RoundingConstants.RELATED_TREE_BOUND * self.target + Tolerances.CERTIFICATE

    @property
    def augmented_ok(self) -> bool:
        return (
            self.augmented_length
            <= RoundingConstants.RELATED_AUGMENTED_TREE_BOUND * self.target + Tolerances.CERTIFICATE
        )


@dataclass
class RelatedCertificates:
    """Bounds checked on a related rounding; ``violations`` lists the failures"""

    facility_cost: float
    facility_bound: float
    connection: np.ndarray
    connection_bound: np.ndarray
    latency: np.ndarray
    latency_bound: np.ndarray
    phases: List[RelatedPhase]
    disjoint: bool
    neighborhoods: List[List[int]]
    sigma: Dict[int, int]
    nbr: Dict[int, int]

    @property
    def violations(self) -> List[str]:
        out = []
        if self.facility_cost > self.facility_bound + Tolerances.CERTIFICATE:
            out.append(f"facility cost {self.facility_cost:.6g} > {self.facility_bound:.6g}")
        for j in np.flatnonzero(self.connection > self.connection_bound + Tolerances.CERTIFICATE):
            out.append(f"client {j}: connection {self.connection[j]:.6g} > {self.connection_bound[j]:.6g}")
        for j in np.flatnonzero(self.latency > self.latency_bound + Tolerances.CERTIFICATE):
            out.append(f"client {j}: latency {self.latency[j]:.6g} > {self.latency_bound[j]:.6g}")
        for ph in self.phases:
            if not ph.steiner_ok:
                out.append(f"phase {ph.phase}: spanning tree {ph.steiner_length:.6g} > 4*{ph.target:g}")
            if not ph.tree_ok:
                out.append(f"phase {ph.phase}: tree {ph.tree_length:.6g} > 5*{ph.target:g}")
            if not ph.augmented_ok:
                out.append(f"phase {ph.phase}: augmented tree {ph.augmented_length:.6g} > 8*{ph.target:g}")
        if not self.disjoint:
            out.append("selected neighbourhoods overlap")
        return out

    @property
    def ok(self) -> bool:
        return not self.violations

    def rows(self) -> List[List[str]]:
        rows = [["kind", "index", "value", "bound", "ok"]]
        rows.append(
            ["facility", "-", f"{self.facility_cost:.12g}", f"{self.facility_bound:.12g}",
             str(self.facility_cost <= self.facility_bound + Tolerances.CERTIFICATE)]
        )
        for j in range(len(self.connection)):
            for kind, value, bound in (
                ("connection", self.connection[j], self.connection_bound[j]),
                ("latency", self.latency[j], self.latency_bound[j]),
            ):
                rows.append([kind, str(j), f"{value:.12g}", f"{bound:.12g}",
                             str(value <= bound + Tolerances.CERTIFICATE)])
        for ph in self.phases:
            for kind, value, factor, ok in (
                ("steiner", ph.steiner_length, RoundingConstants.RELATED_STEINER_BOUND, ph.steiner_ok),
                ("tree", ph.tree_length, RoundingConstants.RELATED_TREE_BOUND, ph.tree_ok),
                ("augmented", ph.augmented_length, RoundingConstants.RELATED_AUGMENTED_TREE_BOUND, ph.augmented_ok),
            ):
                rows.append([kind, str(ph.phase), f"{value:.12g}", f"{factor * ph.target:.12g}", str(ok)])
        return rows

    def write_csv(self, path: Union[str, Path]) -> None:
        write_rows(path, self.rows())


def _full_time_metric(inst: Instance) -> np.ndarray:
    if not inst.is_related:
        raise RoundingError("NOT_RELATED", "instance is not tagged related", "use round_general instead")
    if inst.full_metric is None or inst.related_scale is None:
        raise RoundingError("MISSING_METRIC", "related rounding needs the full connection metric and M")
    return np.asarray(inst.full_metric, dtype=float) / float(inst.related_scale)


def _steiner_tree(
    inst: Instance, full_d: np.ndarray, centers: List[int], neighborhoods: List[List[int]]
) -> Tuple[List[Tuple[int, int]], Dict[int, int]]:
    """MST over the root and contracted neighbourhoods, expanded to the facility
    edges realising it; also returns each neighbourhood's degree"""
    root = inst.root
    graph = nx.Graph()
    graph.add_node("root")
    realise: Dict[Tuple, Tuple[int, int]] = {}
    for a, j in enumerate(centers):
        graph.add_node(j)
        best = min(neighborhoods[j], key=lambda i: (full_d[root, i], i))
        graph.add_edge("root", j, weight=float(full_d[root, best]))
        realise[("root", j)] = (root, best)
        for k in centers[a + 1:]:
            pairs = [(full_d[i, h], i, h) for i in neighborhoods[j] for h in neighborhoods[k]]
            dist, i, h = min(pairs)
            graph.add_edge(j, k, weight=float(dist))
            realise[(j, k)] = (i, h)
            realise[(k, j)] = (h, i)
    spanning = nx.minimum_spanning_tree(graph, weight="weight", algorithm="kruskal")
    edges = []
    degree = {j: 0 for j in centers}
    for u, v in spanning.edges():
        if u == "root":
            u, v = v, u
        if v == "root":
            edges.append(realise[("root", u)])
            degree[u] += 1
        else:
            edges.append(realise[(u, v)])
            degree[u] += 1
            degree[v] += 1
    return edges, degree


def round_related(inst: Instance, frac: FractionalMlufl) -> Tuple[Solution, RelatedCertificates]:
    full_d = _full_time_metric(inst)
    if inst.route_count != 1:
        raise RoundingError("UNSUPPORTED", "related rounding builds a single route")
    problems = frac.check_feasible(inst)
    if problems:
        raise RoundingError("INFEASIBLE_FRAC", "; ".join(problems[:3]))
    n, m, root = inst.n, inst.m, inst.root
    c = inst.connection_cost
    C = frac.connection_star
    L = frac.latency_star
    tau = RoundingConstants.RELATED_LATENCY_FACTOR * L
    support = frac.x.sum(axis=2)
    neighborhoods = [
        [
            i for i in range(n)
            if support[i, j] > Tolerances.FEASIBILITY
            and c[i, j] <= RoundingConstants.RELATED_NEIGHBORHOOD_FACTOR * C[j] + Tolerances.CERTIFICATE
        ]
        for j in range(m)
    ]

    # clustering per phase over the newly ready clients only: a client joins
    # a cluster in the first phase with tau_j <= 2^ell and is not re-clustered
    # with the cumulative ready set of later phases
    phases: List[RelatedPhase] = []
    sigma: Dict[int, int] = {}
    phase_of_center: Dict[int, int] = {}
    ell = 0
    while len(sigma) < m:
        target = 2.0 ** ell
        ready = [j for j in range(m) if j not in sigma and tau[j] <= target + Tolerances.CERTIFICATE]
        if ready:
            centers, assigned = greedy_cluster(
                ready, C, inst.client_distance,
                lambda k: RoundingConstants.RELATED_CLUSTER_RADIUS * C[k],
            )
            sigma.update(assigned)
            phase_of_center.update({j: len(phases) for j in centers})
            phases.append(RelatedPhase(ell, target, centers))
        ell += 1

    # disjoint centres over all phases, smallest C* first
    pool = sorted(phase_of_center, key=lambda j: (C[j], j))
    chosen: List[int] = []
    nbr: Dict[int, int] = {}
    while pool:
        j = pool[0]
        chosen.append(j)
        mine = set(neighborhoods[j])
        rest = []
        for k in pool:
            if k == j or mine & set(neighborhoods[k]):
                nbr[k] = j
            else:
                rest.append(k)
        pool = rest
    opened = {j: min(neighborhoods[j], key=lambda i: (inst.facility_cost[i], i)) for j in chosen}
    disjoint = all(
        not set(neighborhoods[a]) & set(neighborhoods[b]) for x, a in enumerate(chosen) for b in chosen[x + 1:]
    )

    # facility edges (i, k) into the earliest phase holding a centre k with nbr(k) = j
    attach: Dict[int, List[Tuple[int, int]]] = {}
    for j in chosen:
        members = [k for k in phase_of_center if nbr[k] == j]
        k = min(members, key=lambda k: (phase_of_center[k], k))
        attach.setdefault(phase_of_center[k], []).append((opened[j], inst.client_node(k)))

    open_set = set(opened.values())
    order: List[int] = []
    seen: Set[int] = set()
    for index, ph in enumerate(phases):
        steiner, ph.degree = _steiner_tree(inst, full_d, ph.centers, neighborhoods)
        ph.steiner_length = float(sum(full_d[u, v] for u, v in steiner))
        touched = {v for e in steiner for v in e}
        wiring = [(inst.client_node(j), i) for j in ph.centers for i in neighborhoods[j] if i in touched]
        ph.tree_length = ph.steiner_length + float(sum(full_d[u, v] for u, v in wiring))
        extra = attach.get(index, [])
        ph.augmented_length = ph.tree_length + float(sum(full_d[u, v] for u, v in extra))
        graph = nx.Graph()
        graph.add_node(root)
        for u, v in steiner + wiring + extra:
            graph.add_edge(u, v, weight=float(full_d[u, v]))
        tree = tree_from_graph(graph, root)
        tour = euler_tour(tree, full_d, keep=lambda v: v in open_set)
        ph.tour = tour.visited
        for v in tour.visited:
            if v not in seen:
                seen.add(v)
                order.append(v)
        logger.debug(
            "phase %d: %d centres, trees %.6g / %.6g / %.6g",
            ph.phase, len(ph.centers), ph.steiner_length, ph.tree_length, ph.augmented_length,
        )

    assignment = [0] * m
    for j in range(m):
        anchor = j if j in nbr else sigma[j]
        assignment[j] = opened[nbr[anchor]]
    solution = Solution([order], assignment)

    times = solution.activation_times(inst)
    certificates = RelatedCertificates(
        facility_cost=float(sum(inst.facility_cost[i] for i in open_set)),
        facility_bound=RoundingConstants.RELATED_FACILITY_BOUND * frac.facility_mass(inst.facility_cost),
        connection=np.array([c[assignment[j], j] for j in range(m)]),
        connection_bound=RoundingConstants.RELATED_CONNECTION_BOUND * C,
        latency=np.array([times[assignment[j]] for j in range(m)]),
        latency_bound=RoundingConstants.RELATED_LATENCY_BOUND * L,
        phases=phases,
        disjoint=disjoint,
        neighborhoods=neighborhoods,
        sigma=sigma,
        nbr=nbr,
    )
    if certificates.violations:
        logger.warning("related rounding certificate violations: %s", certificates.violations)
    else:
        logger.info("related rounding: %d facilities over %d phase(s)", len(open_set), len(phases))
    return solution, certificates
