"""
Roundings for a uniform time metric (every facility one step from the next)

Covers spreading a capacity-k slot schedule into a capacity-1 one, the
randomized O(ln m) rounding, the zero-facility-cost rounding through min-sum
set cover, a filter-and-cluster UFL rounding, and the combination of the
last two for metric connection costs.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from .config import Config, Tolerances
from .errors import RoundingError
from .exact import ExactLimits, exact_ufl, mssc_cost
from .instance import CostBreakdown, Instance, Solution, evaluate, write_rows
from .relaxations import FractionalMlufl, solve_uniform_relaxation
from .seeding import RngLike, as_rng

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Schedules
# ---------------------------------------------------------------------------


@dataclass
class Schedule:
    """Facilities per slot (slot s is time s + 1) and each client's facility"""

    slots: List[List[int]]
    assignment: List[int]
    capacity: int = 1

    def position(self) -> Dict[int, int]:
        """Earliest slot number (from 1) of every scheduled facility"""
        pos: Dict[int, int] = {}
        for s, members in enumerate(self.slots, start=1):
            for i in members:
                pos.setdefault(i, s)
        return pos

    def check(self) -> List[str]:
        problems = []
        for s, members in enumerate(self.slots, start=1):
            if len(members) > self.capacity:
                problems.append(f"slot {s} holds {len(members)} > {self.capacity} facilities")
        pos = self.position()
        for j, i in enumerate(self.assignment):
            if i not in pos:
                problems.append(f"client {j} uses unscheduled facility {i}")
        return problems

    def latency(self) -> np.ndarray:
        pos = self.position()
        return np.array([pos[i] for i in self.assignment], dtype=float)

    def compact(self) -> "Schedule":
        """Drop repeat openings and the slots left empty, so no empty slot
        precedes a used one"""
        seen: Set[int] = set()
        slots = []
        for members in self.slots:
            fresh = [i for i in members if i not in seen]
            seen.update(fresh)
            if fresh:
                slots.append(fresh)
        return Schedule(slots, list(self.assignment), self.capacity)

    def to_solution(self, route_count: int = 1) -> Solution:
        """Compact the slots into ``route_count`` routes, dealing facilities
        round-robin in slot order; a repeated facility keeps its first slot"""
        order = sorted(self.position().items(), key=lambda item: (item[1], item[0]))
        routes: List[List[int]] = [[] for _ in range(route_count)]
        for p, (i, _) in enumerate(order):
            routes[p % route_count].append(i)
        return Solution(routes, list(self.assignment))


def _schedule_from(x: np.ndarray, y: np.ndarray) -> Schedule:
    """Read an integral capacity-1 (x, y) into a schedule"""
    slots = [[int(i) for i in np.flatnonzero(y[:, s] > 0.5)] for s in range(y.shape[1])]
    assignment = []
    for j in range(x.shape[1]):
        i, _ = np.unravel_index(np.argmax(x[:, j, :]), x[:, j, :].shape)
        assignment.append(int(i))
    return Schedule(slots, assignment)


# ---------------------------------------------------------------------------
# Spreading
# ---------------------------------------------------------------------------


@dataclass
class SpreadResult:
    x: np.ndarray
    y: np.ndarray
    facility_gap: float
    assignment_gap: float
    latency_in: np.ndarray
    latency_out: np.ndarray
    capacity: int

    @property
    def latency_ok(self) -> bool:
        return bool(np.all(self.latency_out <= self.capacity * self.latency_in + 1e-9))

    @property
    def ok(self) -> bool:
        return self.facility_gap <= 1e-9 and self.assignment_gap <= 1e-9 and self.latency_ok


def spread_schedule(xhat: np.ndarray, yhat: np.ndarray, k: int) -> SpreadResult:
    """Turn a schedule with up to k facility mass per slot into one with at
    most one, keeping per-facility and per-assignment mass and stretching
    each client's latency by at most k.

    Pairs (i, t) with positive mass are listed by time, then facility, and
    cut into consecutive groups of mass exactly one (the last may be
    lighter); group l becomes slot l. A pair straddling two groups is split
    with its client masses in proportion.
    """
    xhat = np.asarray(xhat, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    n, m, T = xhat.shape
    if k < 1:
        raise RoundingError("BAD_CAPACITY", f"capacity must be a positive integer, got {k}")
    load = yhat.sum(axis=0)
    if np.any(load > k + Tolerances.FEASIBILITY):
        t = int(np.argmax(load))
        raise RoundingError("CAPACITY", f"slot {t + 1} carries mass {load[t]:.6g} > {k}")
    cover = xhat.sum(axis=(0, 2))
    if np.any(cover < 1 - Tolerances.FEASIBILITY):
        j = int(np.argmin(cover))
        raise RoundingError("UNCOVERED", f"client {j} is covered {cover[j]:.6g} < 1")

    groups = max(int(math.ceil(float(yhat.sum()) - 1e-9)), 1)
    x_out = np.zeros((n, m, groups))
    y_out = np.zeros((n, groups))
    slot, room = 0, 1.0
    for t in range(T):
        for i in range(n):
            weight = yhat[i, t]
            if weight <= 0:
                continue
            left = weight
            while left > 1e-12:
                take = min(left, room)
                y_out[i, slot] += take
                x_out[i, :, slot] += xhat[i, :, t] * (take / weight)
                left -= take
                room -= take
                if room <= 1e-12:
                    if slot + 1 < groups:
                        slot, room = slot + 1, 1.0
                    else:
                        room = math.inf
    times_in = np.arange(1, T + 1, dtype=float)
    times_out = np.arange(1, groups + 1, dtype=float)
    return SpreadResult(
        x=x_out,
        y=y_out,
        facility_gap=float(np.abs(y_out.sum(axis=1) - yhat.sum(axis=1)).max()),
        assignment_gap=float(np.abs(x_out.sum(axis=2) - xhat.sum(axis=2)).max()),
        latency_in=np.einsum("t,ijt->j", times_in, xhat),
        latency_out=np.einsum("t,ijt->j", times_out, x_out),
        capacity=k,
    )


# ---------------------------------------------------------------------------
# General uniform rounding
# ---------------------------------------------------------------------------


def _require_uniform(inst: Instance) -> None:
    if not inst.is_uniform:
        raise RoundingError("NOT_UNIFORM", "instance is not tagged uniform", "use round_general instead")


def normalized(frac: FractionalMlufl) -> Tuple[np.ndarray, np.ndarray]:
    """x scaled to unit coverage per client and y = max over clients of x"""
    cover = frac.coverage
    if np.any(cover < 1 - Tolerances.FEASIBILITY):
        raise RoundingError("INFEASIBLE_FRAC", f"a client is covered {cover.min():.6g} < 1")
    x = frac.x / cover[None, :, None]
    return x, x.max(axis=1)


@dataclass
class UniformReport:
    K: int
    pre_cost: np.ndarray
    pre_bound: np.ndarray
    latency_pre: np.ndarray
    latency_final: np.ndarray
    spread: SpreadResult
    schedule: Schedule
    fallbacks: int = 0

    @property
    def violations(self) -> List[str]:
        out = []
        for j in np.flatnonzero(self.pre_cost > self.pre_bound + Tolerances.CERTIFICATE):
            out.append(f"client {j}: c + t = {self.pre_cost[j]:.6g} > {self.pre_bound[j]:.6g}")
        for j in np.flatnonzero(self.latency_final > self.K * self.latency_pre + 1e-9):
            out.append(f"client {j}: latency {self.latency_final[j]:g} > {self.K} x {self.latency_pre[j]:g}")
        return out + self.schedule.check()


def round_uniform_general(
    inst: Instance, frac: FractionalMlufl, seed: RngLike = None
) -> Tuple[Solution, UniformReport]:
    """Open each (i, t) with probability min(4 ln m y, 1), add the cheapest
    facility at slot 1 for every client whose good pairs all missed, assign
    each client to its best open pair, then spread the slot load K down to 1
    and compact the slots"""
    _require_uniform(inst)
    rng = as_rng(seed)
    n, m = inst.n, inst.m
    x, y = normalized(frac)
    T = x.shape[2]
    times = np.arange(1, T + 1, dtype=float)
    c = np.asarray(inst.connection_cost, dtype=float)
    C = np.einsum("ij,ijt->j", np.where(np.isfinite(c), c, 0.0), x)
    L = np.einsum("t,ijt->j", times, x)
    bound = 2 * (C + L)

    prob = np.minimum(4 * math.log(m) * y, 1.0) if m > 1 else np.zeros_like(y)
    Y = rng.random((n, T)) < prob
    X = np.zeros((n, m, T))
    pre_cost = np.zeros(m)
    fallbacks = 0
    for j in range(m):
        service = c[:, j][:, None] + times[None, :]
        good = service <= bound[j] + Tolerances.CERTIFICATE
        if not np.any(good & Y):
            i_j = min(np.flatnonzero(good.any(axis=1)), key=lambda i: (inst.facility_cost[i], i))
            Y[i_j, 0] = True
            fallbacks += 1
        hit = good & Y
        choices = [(service[i, t], t, i) for i, t in zip(*np.nonzero(hit))]
        value, t, i = min(choices)
        X[i, j, t] = 1.0
        pre_cost[j] = value
    K = int(Y.sum(axis=0).max())
    Yf = Y.astype(float)
    spread = spread_schedule(X, Yf, max(K, 1))
    schedule = _schedule_from(spread.x, spread.y).compact()
    report = UniformReport(
        K=K,
        pre_cost=pre_cost,
        pre_bound=bound,
        latency_pre=np.einsum("t,ijt->j", times, X),
        latency_final=schedule.latency(),
        spread=spread,
        schedule=schedule,
        fallbacks=fallbacks,
    )
    logger.info("uniform rounding: K = %d, %d fallback opening(s)", K, fallbacks)
    if report.violations:
        logger.warning("uniform rounding certificate violations: %s", report.violations)
    return schedule.to_solution(inst.route_count), report


# ---------------------------------------------------------------------------
# Zero facility costs
# ---------------------------------------------------------------------------


def greedy_mssc(sets: Sequence[Iterable]) -> List[int]:
    """Pick the set covering the most uncovered elements (ties by index) until
    everything is covered; the sets that add nothing follow in index order"""
    family = [frozenset(s) for s in sets]
    covered: set = set()
    universe = frozenset().union(*family) if family else frozenset()
    order: List[int] = []
    while covered != universe:
        gain, neg = max((len(members - covered), -s) for s, members in enumerate(family))
        if gain == 0:
            break
        order.append(-neg)
        covered |= family[-neg]
    return order + [s for s in range(len(family)) if s not in order]


@dataclass
class ZfcResult:
    """Open facilities in position order, client assignment and position map"""

    order: List[int]
    assignment: List[int]
    positions: Dict[int, int]
    connection: np.ndarray
    connection_bound: np.ndarray
    latency: float
    latency_bound: float
    mssc_lp_value: float
    spread: SpreadResult

    @property
    def violations(self) -> List[str]:
        return [
            f"client {j}: connection {self.connection[j]:.6g} > {self.connection_bound[j]:.6g}"
            for j in np.flatnonzero(self.connection > self.connection_bound + Tolerances.CERTIFICATE)
        ]

    @property
    def latency_exceeded(self) -> bool:
        """Monitored only: the greedy order against (4/alpha) ceil(1/alpha) sum L*"""
        return self.latency > self.latency_bound + Tolerances.CERTIFICATE

    def to_solution(self, route_count: int = 1) -> Solution:
        slots = [[i] for i in self.order]
        return Schedule(slots, list(self.assignment)).to_solution(route_count)


def round_zfc(inst: Instance, frac: FractionalMlufl, alpha: Optional[float] = None) -> ZfcResult:
    """Filter each client to facilities within C*_j / (1 - alpha), scale by
    1/alpha, spread, and order the facilities by greedy min-sum set cover"""
    alpha = Config.ALPHA if alpha is None else alpha
    if not 0 < alpha < 1:
        raise RoundingError("BAD_ALPHA", f"alpha must lie in (0, 1), got {alpha}")
    if np.any(np.asarray(inst.facility_cost) != 0):
        raise RoundingError("NONZERO_FACILITY_COST", "zero-facility-cost rounding needs f = 0")
    n, m = inst.n, inst.m
    x, _ = normalized(frac)
    T = x.shape[2]
    times = np.arange(1, T + 1, dtype=float)
    c = inst.connection_cost
    C = np.einsum("ij,ijt->j", np.where(np.isfinite(c), c, 0.0), x)
    L = np.einsum("t,ijt->j", times, x)
    radius = C / (1 - alpha) + Tolerances.CERTIFICATE
    member = np.isfinite(c) & (c <= radius[None, :])

    xhat = np.where(member[:, :, None], x, 0.0) / alpha
    yhat = frac.y / alpha
    capacity = int(math.ceil(inst.route_count / alpha - 1e-12))
    spread = spread_schedule(xhat, yhat, capacity)
    bar_x = np.einsum("ij,ijt->jt", member.astype(float), spread.x)
    mssc_lp_value = float(np.einsum("t,jt->", np.arange(1, bar_x.shape[1] + 1, dtype=float), bar_x))

    sets = [set(np.flatnonzero(member[i])) for i in range(n)]
    ranking = greedy_mssc(sets)
    order: List[int] = []
    covered: set = set()
    for i in ranking:
        if sets[i] - covered:
            order.append(i)
            covered |= sets[i]
    positions = {i: p for p, i in enumerate(order, start=1)}
    assignment = [min((i for i in order if member[i, j]), key=lambda i: positions[i]) for j in range(m)]
    latency = float(mssc_cost([sets[i] for i in order], list(range(len(order)))))
    result = ZfcResult(
        order=order,
        assignment=assignment,
        positions=positions,
        connection=np.array([c[assignment[j], j] for j in range(m)]),
        connection_bound=C / (1 - alpha),
        latency=latency,
        latency_bound=(4 / alpha) * math.ceil(1 / alpha - 1e-12) * float(L.sum()),
        mssc_lp_value=mssc_lp_value,
        spread=spread,
    )
    if result.latency_exceeded:
        logger.warning(
            "greedy order latency %.6g exceeds the monitored bound %.6g", result.latency, result.latency_bound
        )
    return result


# ---------------------------------------------------------------------------
# UFL rounding and the metric-uniform combination
# ---------------------------------------------------------------------------


@dataclass
class UflRounding:
    open_set: List[int]
    assignment: List[int]
    facility_cost: float
    facility_bound: float
    connection: np.ndarray
    connection_bound: np.ndarray

    @property
    def violations(self) -> List[str]:
        out = []
        if self.facility_cost > self.facility_bound + Tolerances.CERTIFICATE:
            out.append(f"facility cost {self.facility_cost:.6g} > {self.facility_bound:.6g}")
        for j in np.flatnonzero(self.connection > self.connection_bound + Tolerances.CERTIFICATE):
            out.append(f"client {j}: connection {self.connection[j]:.6g} > {self.connection_bound[j]:.6g}")
        return out


def round_ufl(inst: Instance, frac: FractionalMlufl, beta: Optional[float] = None) -> UflRounding:
    """Filter to facilities within C*_j / (1 - beta) in the support, open the
    cheapest facility of each cluster centre (smallest C* first), serve every
    client from its nearest open facility"""
    beta = Config.BETA if beta is None else beta
    if not 0 < beta < 1:
        raise RoundingError("BAD_BETA", f"beta must lie in (0, 1), got {beta}")
    x, _ = normalized(frac)
    xs = x.sum(axis=2)
    ys = frac.y.sum(axis=1)
    c = inst.connection_cost
    f = np.asarray(inst.facility_cost, dtype=float)
    C = np.einsum("ij,ij->j", np.where(np.isfinite(c), c, 0.0), xs)
    neighborhoods = [
        {i for i in range(inst.n) if xs[i, j] > Tolerances.FEASIBILITY and c[i, j] <= C[j] / (1 - beta) + 1e-9}
        for j in range(inst.m)
    ]
    open_set: List[int] = []
    pending = sorted(range(inst.m), key=lambda j: (C[j], j))
    while pending:
        j = pending[0]
        open_set.append(min(neighborhoods[j], key=lambda i: (f[i], i)))
        pending = [k for k in pending if not neighborhoods[k] & neighborhoods[j]]
    assignment = [min(open_set, key=lambda i: (c[i, j], i)) for j in range(inst.m)]
    return UflRounding(
        open_set=sorted(set(open_set)),
        assignment=assignment,
        facility_cost=float(f[list(set(open_set))].sum()),
        facility_bound=float(f @ ys) / beta,
        connection=np.array([c[assignment[j], j] for j in range(inst.m)]),
        connection_bound=3 * C / (1 - beta),
    )


@dataclass
class CombineReport:
    mapping: Dict[int, int]
    positions: Dict[int, int]
    connection: np.ndarray
    connection_bound: np.ndarray
    position_ok: bool
    total: float
    total_bound: float

    @property
    def violations(self) -> List[str]:
        out = [
            f"client {j}: connection {self.connection[j]:.6g} > {self.connection_bound[j]:.6g}"
            for j in np.flatnonzero(self.connection > self.connection_bound + Tolerances.CERTIFICATE)
        ]
        if not self.position_ok:
            out.append("a client's facility moved later than its set-cover position")
        if self.total > self.total_bound + Tolerances.CERTIFICATE:
            out.append(f"total {self.total:.6g} > {self.total_bound:.6g}")
        return out


def combine_metric_uniform(
    inst: Instance, ufl: UflRounding, zfc: ZfcResult
) -> Tuple[Solution, CombineReport]:
    """Move every set-cover facility to its nearest UFL facility, keep the
    earliest position per target, compact the positions"""
    F1 = ufl.open_set
    mu = {i: min(F1, key=lambda h: (inst.facility_distance(i, h), h)) for i in zfc.order}
    first: Dict[int, int] = {}
    for i in zfc.order:
        first.setdefault(mu[i], zfc.positions[i])
    ordered = sorted(first, key=lambda h: first[h])
    kappa = {h: p for p, h in enumerate(ordered, start=1)}
    assignment = [mu[zfc.assignment[j]] for j in range(inst.m)]
    solution = Schedule([[h] for h in ordered], assignment).to_solution(inst.route_count)

    c = inst.connection_cost
    connection = np.array([c[assignment[j], j] for j in range(inst.m)])
    bound = np.array([c[ufl.assignment[j], j] + 2 * c[zfc.assignment[j], j] for j in range(inst.m)])
    position_ok = all(kappa[assignment[j]] <= zfc.positions[zfc.assignment[j]] for j in range(inst.m))
    total = evaluate(inst, solution).total
    weight = inst.client_weight
    total_bound = ufl.facility_cost + float(
        sum(bound[j] + weight[j] * inst.latency(zfc.positions[zfc.assignment[j]]) for j in range(inst.m))
    )
    report = CombineReport(mu, kappa, connection, bound, position_ok, total, total_bound)
    if report.violations:
        logger.warning("metric-uniform combination violations: %s", report.violations)
    return solution, report


@dataclass
class MetricUniformResult:
    solution: Solution
    breakdown: CostBreakdown
    lp_value: float
    ratio: float
    bound_factor: float
    ufl: UflRounding
    zfc: ZfcResult
    report: CombineReport

    @property
    def within_bound(self) -> bool:
        return self.breakdown.total <= self.bound_factor * self.lp_value + Tolerances.CERTIFICATE

    @property
    def violations(self) -> List[str]:
        """Combination, UFL and zero-cost certificate failures plus the total bound"""
        found = self.report.violations + self.ufl.violations + self.zfc.violations
        if not self.within_bound:
            found.append(
                f"total {self.breakdown.total:.6g} exceeds {self.bound_factor:g} x LP {self.lp_value:.6g}"
            )
        return found

    def rows(self) -> List[List[str]]:
        rows = [["client", "connection", "bound", "ufl_facility", "zfc_facility", "facility", "position"]]
        for j in range(len(self.solution.assignment)):
            h = self.solution.assignment[j]
            rows.append([
                str(j), f"{self.report.connection[j]:.12g}", f"{self.report.connection_bound[j]:.12g}",
                str(self.ufl.assignment[j]), str(self.zfc.assignment[j]), str(h), str(self.report.positions[h]),
            ])
        return rows

    def write_csv(self, path: Union[str, Path]) -> None:
        write_rows(path, self.rows())


def certified_factor(alpha: float, beta: float) -> float:
    return max(1 / beta, 3 / (1 - beta) + 2 / (1 - alpha), (4 / alpha) * math.ceil(1 / alpha - 1e-12))


def metric_uniform_pipeline(
    inst: Instance,
    alpha: Optional[float] = None,
    beta: Optional[float] = None,
    cardinality: Optional[int] = None,
    limits: ExactLimits = ExactLimits(),
) -> MetricUniformResult:
    """Uniform LP, UFL rounding (or the exact k-facility UFL with
    ``cardinality``), zero-cost rounding, combination"""
    _require_uniform(inst)
    alpha = Config.ALPHA if alpha is None else alpha
    beta = Config.BETA if beta is None else beta
    relaxation = solve_uniform_relaxation(inst)
    if relaxation.frac is None:
        raise RoundingError("LP_FAILED", f"uniform LP ended with status {relaxation.solution.status.value}")
    frac = relaxation.frac
    if cardinality is None:
        ufl = round_ufl(inst, frac, beta)
    else:
        exact = exact_ufl(inst, cardinality, limits)
        c = inst.connection_cost
        ufl = UflRounding(
            open_set=exact.open_set,
            assignment=exact.assignment,
            facility_cost=float(sum(inst.facility_cost[i] for i in exact.open_set)),
            facility_bound=math.inf,
            connection=np.array([c[exact.assignment[j], j] for j in range(inst.m)]),
            connection_bound=np.full(inst.m, math.inf),
        )
    zfc = round_zfc(inst.with_zero_facility_costs(), frac, alpha)
    solution, report = combine_metric_uniform(inst, ufl, zfc)
    breakdown = evaluate(inst, solution)
    value = relaxation.value
    ratio = breakdown.total / value if value > Tolerances.FEASIBILITY else 1.0
    return MetricUniformResult(
        solution, breakdown, value, ratio, certified_factor(alpha, beta), ufl, zfc, report
    )
