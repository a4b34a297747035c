"""
Phased rounding for general MLUFL

Each phase embeds the time metric into a fresh random tree, hangs a dummy
leaf of weight f_i under every facility, lifts the fractional edge values
at the phase's grid time onto the tree and runs batches of GKR roundings.
The first batch within both budget tests opens its facilities; the
resulting subtree becomes a tour, and unconnected clients that are ready
in the phase and have an open facility in their neighbourhood are
connected. Phase tours are concatenated, or each is split into k segments
appended to the k routes.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple, Union

import numpy as np

from .config import Config, RoundingConstants, Tolerances
from .errors import RoundingError
from .instance import CostBreakdown, EvalMode, Instance, Solution, evaluate, write_rows
from .relaxations import (
    FractionalMlufl,
    MluflLpOptions,
    Relaxation,
    TimeScale,
    build_timescale,
    solve_lp_norm_relaxation,
    solve_mlufl_relaxation,
)
from .seeding import make_rng
from .treekit import WeightedTree, euler_tour, flow_normalize, frt_embed, gkr_round_many, walk

logger = logging.getLogger(__name__)


class PhaseMode(str, Enum):
    PLAIN = "plain"
    SCALED = "scaled"
    GROWTH = "growth"


@dataclass
class GeneralParams:
    mode: PhaseMode = PhaseMode.PLAIN
    p: float = 1.0
    route_count: Optional[int] = None
    seed: int = 0
    retries: int = field(default_factory=lambda: Config.RETRIES)


@dataclass
class PhasePlan:
    """Phase grid times plus each client's neighbourhood and coverage time"""

    targets: List[float]
    grid_index: List[int]
    grid_times: List[float]
    neighborhoods: List[List[int]]
    tau: np.ndarray

    @property
    def count(self) -> int:
        return len(self.targets)

    @property
    def tau_max(self) -> float:
        return float(self.tau.max()) if self.tau.size else 0.0

    def ready(self, phase: int) -> List[int]:
        """Clients with tau_j <= the phase's grid time"""
        g = self.grid_times[phase]
        return [j for j in range(len(self.tau)) if self.tau[j] <= g + 1e-9]


@dataclass
class PhaseRecord:
    attempt: int
    phase: int
    target: float
    grid_time: float
    ready: int
    batch: int
    opened: int
    facility_cost: float
    tree_mass: float
    tour_length: float
    connected: int

    def row(self) -> List[str]:
        return [
            str(self.attempt), str(self.phase), f"{self.target:.12g}", f"{self.grid_time:.12g}",
            str(self.ready), str(self.batch), str(self.opened), f"{self.facility_cost:.12g}",
            f"{self.tree_mass:.12g}", f"{self.tour_length:.12g}", str(self.connected),
        ]


PHASE_HEADER = [
    "attempt", "phase", "target", "grid_time", "ready", "batch", "opened",
    "facility_cost", "tree_mass", "tour_length", "connected",
]


@dataclass
class RouteSegment:
    """Part of route `route` contributed by one phase, closed at the root"""

    phase: int
    route: int
    length: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.length <= self.bound + Tolerances.CERTIFICATE


@dataclass
class GeneralDiagnostics:
    plan: PhasePlan
    attempts: int = 0
    records: List[PhaseRecord] = field(default_factory=list)
    connection_violations: int = 0
    segments: List[RouteSegment] = field(default_factory=list)
    max_route_length: float = 0.0

    @property
    def route_bound_ok(self) -> bool:
        """Every segment of a phase tour split k ways is within tour/k + 2 * grid time"""
        return all(s.ok for s in self.segments)

    def rows(self) -> List[List[str]]:
        return [PHASE_HEADER] + [r.row() for r in self.records]

    def write_csv(self, path: Union[str, Path]) -> None:
        write_rows(path, self.rows())


# ---------------------------------------------------------------------------
# Phase plan
# ---------------------------------------------------------------------------


def plan_phases(inst: Instance, frac: FractionalMlufl, ts: TimeScale, params: GeneralParams) -> PhasePlan:
    C = frac.connection_star
    c = inst.connection_cost
    times = frac.times
    neighborhoods = []
    tau = np.zeros(inst.m)
    cum = frac.cumulative_x()
    for j in range(inst.m):
        radius = RoundingConstants.NEIGHBORHOOD_FACTOR * C[j] + Tolerances.CERTIFICATE
        members = [i for i in range(inst.n) if np.isfinite(c[i, j]) and c[i, j] <= radius]
        neighborhoods.append(members)
        mass = cum[members, j, :].sum(axis=0) if members else np.zeros(len(times))
        hit = np.flatnonzero(mass >= RoundingConstants.COVERAGE_THRESHOLD - 1e-9)
        if hit.size == 0:
            raise RoundingError(
                "INFEASIBLE_FRAC",
                f"client {j} has neighbourhood coverage {mass[-1]:.6g} below 2/3",
            )
        tau[j] = times[hit[0]]

    tau_max = float(tau.max())
    log_m = math.log2(inst.m) if inst.m > 1 else 0.0
    horizon = float(times[-1])
    mean = max(frac.mean_latency, 1.0)
    if params.mode == PhaseMode.PLAIN:
        count = math.ceil(math.log2(2 * tau_max) + 4 * log_m)
        targets = [min(2.0 ** ell, horizon) for ell in range(count)]
    elif params.mode == PhaseMode.SCALED:
        count = math.ceil(math.log2(2 * tau_max / mean) + 4 * log_m)
        targets = [mean * 2.0 ** ell for ell in range(count)]
    else:
        p = params.p
        count = math.ceil(p * math.log2(2 ** (1 / p) * tau_max / mean) + 4 * log_m)
        targets = [mean * 2.0 ** (ell / p) for ell in range(count)]
    count = max(count, 1)
    targets = targets[:count] or [min(1.0, horizon)]
    # keep going until the last client is ready
    while ts(targets[-1]) < tau_max - 1e-9:
        targets.append(targets[-1] * 2.0)
    grid_index = [ts.index_of(t) for t in targets]
    return PhasePlan(
        targets=targets,
        grid_index=grid_index,
        grid_times=[float(times[q]) for q in grid_index],
        neighborhoods=neighborhoods,
        tau=tau,
    )


# ---------------------------------------------------------------------------
# One phase
# ---------------------------------------------------------------------------


def dummy(i: int) -> Tuple[str, int]:
    return ("dummy", i)


def phase_tree(inst: Instance, rng: np.random.Generator) -> WeightedTree:
    """Random tree over facilities and root, rooted at the root, with dummy leaves"""
    tree = frt_embed(inst.time_metric, rng, root=inst.root)
    for i in range(inst.n):
        tree.add_edge(i, dummy(i), float(inst.facility_cost[i]))
    return tree


def lift_values(tree: WeightedTree, frac: FractionalMlufl, q: int) -> Dict:
    """Tree edge values: z summed over metric edges whose tree path uses them;
    dummy edges carry the facility's opening mass up to grid index q"""
    lifted: Dict = {v: 0.0 for v in tree.parent}
    for (u, v), value in frac.z_at(q).items():
        if value <= 0:
            continue
        for e in tree.path_edges(u, v):
            lifted[e] += value
    opened = frac.y[:, : q + 1].sum(axis=1)
    for i in range(frac.n):
        lifted[dummy(i)] = float(opened[i])
    return lifted


def _run_phase(
    inst: Instance,
    frac: FractionalMlufl,
    plan: PhasePlan,
    phase: int,
    pending: Set[int],
    rng: np.random.Generator,
) -> Tuple[Optional[Set[int]], Optional[WeightedTree], int, float]:
    """Opened facilities, rounded subtree, accepted batch, fractional tree mass"""
    q = plan.grid_index[phase]
    tree = phase_tree(inst, rng)
    lifted = lift_values(tree, frac, q)
    ready = set(plan.ready(phase))
    groups = [[dummy(i) for i in plan.neighborhoods[j]] for j in sorted(pending) if j in ready]
    if not groups:
        return set(), None, -1, 0.0
    normalized = flow_normalize(tree, lifted, groups)

    runs = math.ceil(RoundingConstants.GKR_RUNS_FACTOR * RoundingConstants.log2_clamped(inst.n))
    batches = max(1, math.ceil(math.log2(inst.m))) if inst.m > 1 else 1
    factor = RoundingConstants.GKR_BUDGET_FACTOR * runs
    facility_mass = sum(float(inst.facility_cost[i]) * lifted[dummy(i)] for i in range(inst.n))
    tree_mass = sum(
        tree.weight[v] * lifted[v] for v in tree.parent if not (isinstance(v, tuple) and v[0] == "dummy")
    )
    for batch in range(batches):
        sample = gkr_round_many(tree, normalized, runs, rng)
        kept = sample.union()
        opened = {i for i in range(inst.n) if dummy(i) in kept}
        opened_cost = float(sum(inst.facility_cost[i] for i in opened))
        kept_mass = sum(
            tree.weight[v] for v in kept if v != tree.root and not (isinstance(v, tuple) and v[0] == "dummy")
        )
        if opened_cost <= factor * facility_mass + 1e-9 and kept_mass <= factor * tree_mass + 1e-9:
            return opened, tree.subtree(kept), batch, tree_mass
        logger.debug("phase %d batch %d failed the budget tests", phase, batch)
    return None, None, batches, tree_mass


# ---------------------------------------------------------------------------
# Rounding
# ---------------------------------------------------------------------------


def split_tour(order: List[int], arrival: Dict[int, float], length: float, k: int) -> List[List[int]]:
    """Split a tour into k pieces of (nearly) equal length"""
    pieces: List[List[int]] = [[] for _ in range(k)]
    for v in order:
        slot = 0 if length <= 0 else min(int(arrival[v] * k / length), k - 1)
        pieces[slot].append(v)
    return pieces


def round_general(
    inst: Instance, frac: FractionalMlufl, ts: TimeScale, params: Optional[GeneralParams] = None
) -> Tuple[Solution, GeneralDiagnostics]:
    params = params or GeneralParams()
    k = params.route_count or inst.route_count
    problems = frac.check_feasible(inst, k)
    if problems:
        raise RoundingError("INFEASIBLE_FRAC", "; ".join(problems[:3]))
    plan = plan_phases(inst, frac, ts, params)
    diagnostics = GeneralDiagnostics(plan)
    C = frac.connection_star

    for attempt in range(params.retries):
        diagnostics.attempts = attempt + 1
        assignment: Dict[int, int] = {}
        phase_tours: List[Tuple[int, List[int], Dict[int, float], float, float]] = []
        failed = False
        for phase in range(plan.count):
            pending = {j for j in range(inst.m) if j not in assignment}
            if not pending:
                break
            rng = make_rng(params.seed, attempt, phase)
            opened, subtree, batch, mass = _run_phase(inst, frac, plan, phase, pending, rng)
            if opened is None:
                failed = True
                logger.info("attempt %d: phase %d found no batch within budget", attempt, phase)
                break
            tour_length = 0.0
            connected = 0
            if opened and subtree is not None:
                tour = euler_tour(subtree, inst.time_metric, keep=lambda v, s=opened: v in s)
                tour_length = tour.length
                phase_tours.append((phase, tour.visited, tour.arrival, tour.length, plan.grid_times[phase]))
                ready = set(plan.ready(phase))
                for j in sorted(pending & ready):
                    near = [i for i in plan.neighborhoods[j] if i in opened]
                    if near:
                        assignment[j] = min(near, key=lambda i: (inst.connection_cost[i, j], i))
                        connected += 1
            diagnostics.records.append(
                PhaseRecord(
                    attempt, phase, plan.targets[phase], plan.grid_times[phase], len(plan.ready(phase)),
                    batch, len(opened), float(sum(inst.facility_cost[i] for i in opened)), mass,
                    tour_length, connected,
                )
            )
        if failed or len(assignment) < inst.m:
            logger.warning(
                "rounding attempt %d failed (%d of %d clients connected)", attempt, len(assignment), inst.m
            )
            continue

        routes: List[List[int]] = [[] for _ in range(k)]
        seen: Set[int] = set()
        segments: List[RouteSegment] = []
        for phase, visited, arrival, length, grid_time in phase_tours:
            pieces = split_tour(visited, arrival, length, k) if k > 1 else [visited]
            for q, piece in enumerate(pieces):
                fresh = [v for v in piece if v not in seen]
                seen.update(fresh)
                routes[q].extend(fresh)
                if k > 1 and fresh:
                    closed = walk(inst.time_metric, [inst.root] + fresh).closed_length
                    segments.append(RouteSegment(phase, q, closed, length / k + 2 * grid_time))
        solution = Solution(routes, [assignment[j] for j in range(inst.m)])
        diagnostics.connection_violations = sum(
            1
            for j, i in enumerate(solution.assignment)
            if inst.connection_cost[i, j] > RoundingConstants.NEIGHBORHOOD_FACTOR * C[j] + Tolerances.CERTIFICATE
        )
        diagnostics.segments = segments
        diagnostics.max_route_length = max(solution.route_lengths(inst))
        logger.info(
            "rounded in attempt %d with %d phase(s); %d facilities open",
            attempt, len(phase_tours), len(solution.open_set),
        )
        return solution, diagnostics

    raise RoundingError(
        "RETRIES_EXHAUSTED",
        f"no attempt out of {params.retries} connected every client",
        "raise the retry count or use another seed",
    )


# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------


@dataclass
class DriverResult:
    solution: Solution
    breakdown: CostBreakdown
    lp_value: float
    ratio: float
    diagnostics: GeneralDiagnostics
    frac: FractionalMlufl


def _ratio(cost: float, bound: float) -> float:
    if bound <= Tolerances.FEASIBILITY:
        return 1.0 if cost <= Tolerances.FEASIBILITY else math.inf
    return cost / bound


def round_general_lp_driver(
    inst: Instance,
    epsilon: Optional[float] = None,
    params: Optional[GeneralParams] = None,
    relaxation: Optional[Relaxation] = None,
) -> DriverResult:
    """Grid, LP with cutting planes, rounding and evaluation in one call.

    Pass ``relaxation`` to round an already solved LP again under a new seed.
    """
    params = params or GeneralParams()
    if relaxation is None:
        ts = build_timescale(inst, epsilon)
        relaxation = solve_mlufl_relaxation(inst, ts, MluflLpOptions(route_count=params.route_count))
    if relaxation.frac is None:
        raise RoundingError("LP_FAILED", f"relaxation ended with status {relaxation.solution.status.value}")
    solution, diagnostics = round_general(inst, relaxation.frac, relaxation.ts, params)
    breakdown = evaluate(inst, solution)
    return DriverResult(
        solution, breakdown, relaxation.value, _ratio(breakdown.total, relaxation.value), diagnostics, relaxation.frac
    )


def round_general_norm_driver(
    inst: Instance, p: float, epsilon: Optional[float] = None, params: Optional[GeneralParams] = None
) -> DriverResult:
    """Latency-norm mode: best norm guess, growth-p phases, norm evaluation"""
    params = params or GeneralParams()
    ts = build_timescale(inst, epsilon)
    norm = solve_lp_norm_relaxation(inst, ts, p)
    growth = GeneralParams(PhaseMode.GROWTH, p, params.route_count, params.seed, params.retries)
    solution, diagnostics = round_general(inst, norm.frac, ts, growth)
    breakdown = evaluate(inst, solution, EvalMode(norm_p=p))
    return DriverResult(solution, breakdown, norm.value, _ratio(breakdown.total, norm.value), diagnostics, norm.frac)
