"""
LP relaxations of MLUFL over a compressed time grid

- TimeScale: the geometric time grid and its rounding map
- build_mlufl_lp: the time-indexed LP with lazily separated connectivity
  cuts (one max-flow per client and grid time)
- build_uniform_lp: the compact LP for uniform time metrics
- solve_lp_norm_relaxation: latency-norm mode by guessing the norm value

A variable x(i, j, r) means "client j is served by facility i, which is
reached by grid time T_r". Its latency is charged at the lower end of the
grid interval (T_{r-1}, T_r], raised to d(r, i), so the compressed LP stays
a relaxation of the exact problem.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .config import Config, Tolerances
from .errors import RoundingError
from .instance import INF, Instance, LatencyFunction, Solution
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

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


# ---------------------------------------------------------------------------
# Time grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeScale:
    """Sorted grid of integer times 1 = T_0 < T_1 < ... < T_k"""

    epsilon: float
    times: Tuple[float, ...]

    @classmethod
    def build(cls, horizon: float, epsilon: float) -> "TimeScale":
        if not 0 < epsilon <= 1:
            raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
        horizon = max(float(horizon), 1.0)
        times: List[float] = []
        r = 0
        while not times or times[-1] < horizon:
            t = float(math.ceil((1.0 + epsilon) ** r - 1e-12))
            if not times or t > times[-1]:
                times.append(t)
            r += 1
        return cls(float(epsilon), tuple(times))

    @classmethod
    def full(cls, horizon: float) -> "TimeScale":
        """Every integer time 1..ceil(horizon)"""
        top = max(int(math.ceil(horizon - 1e-12)), 1)
        return cls(0.0, tuple(float(t) for t in range(1, top + 1)))

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self):
        return iter(self.times)

    def __call__(self, x: float) -> float:
        """Earliest grid time >= x, clamped to the horizon"""
        return self.times[self.index_of(x)]

    def index_of(self, x: float) -> int:
        for k, t in enumerate(self.times):
            if t >= x - 1e-12:
                return k
        return len(self.times) - 1

    def floor_index(self, x: float) -> int:
        """Index of the latest grid time <= x (0 if none)"""
        best = 0
        for k, t in enumerate(self.times):
            if t <= x + 1e-12:
                best = k
        return best

    @property
    def horizon(self) -> float:
        return self.times[-1]

    def as_array(self) -> np.ndarray:
        return np.array(self.times, dtype=float)

    def lower_ends(self, integral: bool) -> np.ndarray:
        """Lower end of each grid interval; +1 when times are integral"""
        times = self.as_array()
        lower = np.concatenate([[0.0], times[:-1] + (1.0 if integral else 0.0)])
        return np.minimum(lower, times)


def _horizon(inst: Instance) -> float:
    horizon = min(inst.n, inst.m) * inst.d_max
    if math.isfinite(inst.route_budget):
        horizon = min(horizon, inst.route_budget)
    return max(horizon, 1.0)


def build_timescale(inst: Instance, epsilon: Optional[float] = None) -> TimeScale:
    eps = Config.EPSILON if epsilon is None else epsilon
    return TimeScale.build(_horizon(inst), eps)


def full_timescale(inst: Instance) -> TimeScale:
    return TimeScale.full(_horizon(inst))


def is_integral_metric(d: np.ndarray) -> bool:
    finite = d[np.isfinite(d)]
    return bool(np.all(np.abs(finite - np.round(finite)) <= Tolerances.METRIC))


def charge_times(ts: TimeScale, root_distance: np.ndarray, integral: bool) -> np.ndarray:
    """Latency charged per (node, grid index)"""
    lower = ts.lower_ends(integral)
    return np.maximum(np.asarray(root_distance, dtype=float)[:, None], lower[None, :])


def facility_edges(n: int) -> List[Edge]:
    """Undirected edges over facilities 0..n-1 and the root n"""
    return list(itertools.combinations(range(n + 1), 2))


# ---------------------------------------------------------------------------
# Fractional solutions
# ---------------------------------------------------------------------------


@dataclass
class FractionalMlufl:
    """Fractional (x, y, z) on a time grid with the per-client statistics"""

    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    connection_cost: np.ndarray
    weights: np.ndarray
    latency: LatencyFunction = field(default_factory=LatencyFunction)
    edges: List[Edge] = field(default_factory=list)
    z: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def m(self) -> int:
        return self.x.shape[1]

    def _finite_c(self) -> np.ndarray:
        return np.where(np.isfinite(self.connection_cost), self.connection_cost, 0.0)

    @property
    def coverage(self) -> np.ndarray:
        return self.x.sum(axis=(0, 2))

    @property
    def connection_star(self) -> np.ndarray:
        """C*_j"""
        return np.einsum("ij,ijt->j", self._finite_c(), self.x)

    @property
    def latency_star(self) -> np.ndarray:
        """L*_j"""
        return np.einsum("t,ijt->j", self.times, self.x)

    @property
    def latency_cost(self) -> np.ndarray:
        """Lcost_j = sum of lambda(t) x"""
        return np.einsum("t,ijt->j", self.latency.values(self.times), self.x)

    @property
    def mean_latency(self) -> float:
        total = float(self.weights.sum())
        if total <= 0:
            return 0.0
        return float(self.weights @ self.latency_star) / total

    def facility_mass(self, facility_cost: np.ndarray, upto: Optional[int] = None) -> float:
        y = self.y if upto is None else self.y[:, : upto + 1]
        return float(facility_cost @ y.sum(axis=1))

    def cumulative_x(self) -> np.ndarray:
        return np.cumsum(self.x, axis=2)

    def z_at(self, r: int) -> Dict[Edge, float]:
        if self.z.size == 0:
            return {}
        return {e: float(self.z[k, r]) for k, e in enumerate(self.edges)}

    def check_feasible(self, inst: Instance, route_count: Optional[int] = None, tol: float = 1e-6) -> List[str]:
        """Violations of the non-cut rows (empty when feasible)"""
        problems = []
        k = route_count or inst.route_count
        cover = self.coverage
        for j in np.flatnonzero(cover < 1 - tol):
            problems.append(f"client {j} is covered {cover[j]:.6g} < 1")
        excess = self.x - self.y[:, None, :]
        if np.any(excess > tol):
            problems.append(f"x exceeds y by {excess.max():.3g}")
        d_root = inst.time_metric[inst.root, : inst.n]
        early = (d_root[:, None] > self.times[None, :] + Tolerances.METRIC) & (self.y > tol)
        if np.any(early):
            i, r = np.argwhere(early)[0]
            problems.append(f"facility {i} is open at time {self.times[r]:g} < d(r, i)")
        if self.z.size:
            lengths = np.array([inst.time_metric[u, v] for u, v in self.edges]) @ self.z
            over = lengths - k * self.times * (1 + Tolerances.FEASIBILITY)
            for r in np.flatnonzero(over > tol):
                problems.append(f"edge mass {lengths[r]:.6g} exceeds {k}*{self.times[r]:g}")
        infinite = ~np.isfinite(inst.connection_cost)
        if np.any(self.x.sum(axis=2)[infinite] > tol):
            problems.append("x is positive on an infinite connection cost")
        return problems

    @classmethod
    def from_lp(cls, inst: Instance, ts: TimeScale, solution: LpSolution) -> "FractionalMlufl":
        n, m, T = inst.n, inst.m, len(ts)
        x = np.zeros((n, m, T))
        y = np.zeros((n, T))
        for (i, j, r), value in solution.block_values("x").items():
            x[i, j, r] = value
        for (i, r), value in solution.block_values("y").items():
            y[i, r] = value
        edges = facility_edges(n)
        z = np.zeros((len(edges), T))
        position = {e: k for k, e in enumerate(edges)}
        for (u, v, r), value in solution.block_values("z").items():
            z[position[(u, v)], r] = value
        return cls(
            times=ts.as_array(),
            x=np.clip(x, 0.0, None),
            y=np.clip(y, 0.0, None),
            connection_cost=np.array(inst.connection_cost),
            weights=np.array(inst.client_weight),
            latency=inst.latency,
            edges=edges,
            z=np.clip(z, 0.0, None),
        )

    @classmethod
    def from_solution(cls, inst: Instance, sol: Solution, ts: TimeScale) -> "FractionalMlufl":
        """Integral indicator of a solution on the grid"""
        n, m, T = inst.n, inst.m, len(ts)
        x = np.zeros((n, m, T))
        y = np.zeros((n, T))
        edges = facility_edges(n)
        position = {e: k for k, e in enumerate(edges)}
        z = np.zeros((len(edges), T))
        times = sol.activation_times(inst)
        for i in sol.open_set:
            y[i, ts.index_of(times[i])] = 1.0
        for j, i in enumerate(sol.assignment):
            x[i, j, ts.index_of(times[i])] = 1.0
        for route in sol.route_nodes(inst):
            for prev, cur in zip(route, route[1:]):
                first = ts.index_of(times[cur])
                z[position[tuple(sorted((prev, cur)))], first:] += 1.0
        return cls(
            times=ts.as_array(),
            x=x,
            y=y,
            connection_cost=np.array(inst.connection_cost),
            weights=np.array(inst.client_weight),
            latency=inst.latency,
            edges=edges,
            z=z,
        )


# ---------------------------------------------------------------------------
# The time-indexed LP
# ---------------------------------------------------------------------------


@dataclass
class MluflLpOptions:
    route_count: Optional[int] = None
    latency_cap: Optional[float] = None
    norm_p: float = 1.0


class ConnectivityCutOracle:
    """Separates: by time T_r the route edges must carry, across every
    facility set S avoiding the root, the client's mass served inside S"""

    def __init__(self, inst: Instance, ts: TimeScale):
        self.inst = inst
        self.ts = ts
        self.edges = facility_edges(inst.n)

    def violations(self, model: LpModel, values: np.ndarray) -> List[Constraint]:
        inst, n = self.inst, self.inst.n
        cuts: List[Constraint] = []
        for r in range(len(self.ts)):
            z_cols = {e: model.var("z", (e[0], e[1], r)) for e in self.edges}
            for j in range(inst.m):
                demand_cols: Dict[int, List[int]] = {}
                demand: Dict[int, float] = {}
                for i in range(n):
                    cols = [model.var("x", (i, j, q)) for q in range(r + 1)]
                    cols = [k for k in cols if k is not None]
                    if cols:
                        demand_cols[i] = cols
                        demand[i] = float(sum(values[k] for k in cols))
                total = sum(demand.values())
                if total <= Tolerances.CUT_VIOLATION:
                    continue
                net = FlowNetwork(list(range(n + 1)) + ["sink"], [], n, "sink")
                for (u, v), k in z_cols.items():
                    cap = max(float(values[k]), 0.0)
                    if cap > 0:
                        net.add_undirected(u, v, cap)
                for i, a in demand.items():
                    if a > 0:
                        net.arcs.append((i, "sink", a))
                flow = max_flow(net)
                if total - flow.value <= Tolerances.CUT_VIOLATION:
                    continue
                inside = {i for i in range(n) if i not in flow.source_side}
                coefficients: Dict[int, float] = {}
                for (u, v), k in z_cols.items():
                    if (u in inside) != (v in inside):
                        coefficients[k] = 1.0
                for i in inside:
                    for k in demand_cols.get(i, []):
                        coefficients[k] = coefficients.get(k, 0.0) - 1.0
                cuts.append(
                    Constraint(coefficients, Sense.GE, 0.0, f"cut_j{j}_t{r}_" + "_".join(map(str, sorted(inside))))
                )
        return cuts

    def __call__(self, model: LpModel, solution: LpSolution) -> List[Constraint]:
        return self.violations(model, solution.values)


def build_mlufl_lp(
    inst: Instance, ts: TimeScale, options: Optional[MluflLpOptions] = None
) -> Tuple[LpModel, ConnectivityCutOracle]:
    """Time-indexed LP without connectivity cuts, plus their separation oracle"""
    options = options or MluflLpOptions()
    k = options.route_count or inst.route_count
    n, m = inst.n, inst.m
    d = inst.time_metric
    times = ts.as_array()
    charge = charge_times(ts, d[inst.root, :n], is_integral_metric(d))
    capped = options.latency_cap is not None
    model = LpModel("mlufl")

    for i in range(n):
        for r, t in enumerate(times):
            if d[inst.root, i] <= t + Tolerances.METRIC:
                model.add_variable("y", (i, r), cost=float(inst.facility_cost[i]))
    for j in range(m):
        for i in range(n):
            if not math.isfinite(inst.connection_cost[i, j]):
                continue
            for r in range(len(times)):
                if model.var("y", (i, r)) is None:
                    continue
                latency = 0.0 if capped else float(inst.client_weight[j]) * inst.latency(charge[i, r])
                model.add_variable("x", (i, j, r), cost=float(inst.connection_cost[i, j]) + latency)
    edges = facility_edges(n)
    for r in range(len(times)):
        for u, v in edges:
            model.add_variable("z", (u, v, r))

    for j in range(m):
        cols = [model.var("x", (i, j, r)) for i in range(n) for r in range(len(times))]
        model.add_constraint({c: 1.0 for c in cols if c is not None}, Sense.GE, 1.0, f"cover_{j}")
    for kx, var in enumerate(model.variables):
        if var.block == "x":
            i, j, r = var.index
            model.add_constraint({kx: 1.0, model.var("y", (i, r)): -1.0}, Sense.LE, 0.0, f"link_{i}_{j}_{r}")
    for r, t in enumerate(times):
        row = {model.var("z", (u, v, r)): float(d[u, v]) for u, v in edges if d[u, v] > 0}
        model.add_constraint(row, Sense.LE, k * float(t), f"length_{r}")
    if capped:
        p = options.norm_p
        row = {}
        for kx, var in enumerate(model.variables):
            if var.block == "x":
                i, j, r = var.index
                row[kx] = float(inst.client_weight[j]) * float(charge[i, r]) ** p
        model.add_constraint(row, Sense.LE, float(options.latency_cap) ** p, "latency_cap")
    logger.debug(
        "built LP with %d variables and %d rows over %d grid times",
        model.num_variables, model.num_constraints, len(times),
    )
    return model, ConnectivityCutOracle(inst, ts)


@dataclass
class Relaxation:
    solution: LpSolution
    frac: Optional[FractionalMlufl]
    ts: TimeScale

    @property
    def value(self) -> float:
        return self.solution.objective

    @property
    def is_optimal(self) -> bool:
        return self.solution.is_optimal


def solve_mlufl_relaxation(
    inst: Instance,
    ts: TimeScale,
    options: Optional[MluflLpOptions] = None,
    max_rounds: Optional[int] = None,
) -> Relaxation:
    model, oracle = build_mlufl_lp(inst, ts, options)
    solution = cutting_plane_solve(model, oracle, max_rounds)
    frac = FractionalMlufl.from_lp(inst, ts, solution) if solution.is_optimal else None
    return Relaxation(solution, frac, ts)


def exhaustive_cut_violations(
    inst: Instance, frac: FractionalMlufl, tol: float = Tolerances.CUT_VIOLATION
) -> List[Tuple[int, float, Tuple[int, ...], float]]:
    """Every violated connectivity row, by enumerating all facility sets"""
    n = inst.n
    cumulative = frac.cumulative_x()
    found = []
    for r, t in enumerate(frac.times):
        z = frac.z_at(r)
        for size in range(1, n + 1):
            for S in itertools.combinations(range(n), size):
                inside = set(S)
                crossing = sum(value for (u, v), value in z.items() if (u in inside) != (v in inside))
                for j in range(inst.m):
                    demand = float(sum(cumulative[i, j, r] for i in S))
                    if demand - crossing > tol:
                        found.append((j, float(t), S, demand - crossing))
    return found


# ---------------------------------------------------------------------------
# Latency-norm mode
# ---------------------------------------------------------------------------


@dataclass
class NormRelaxation:
    latency_cap: float
    value: float
    relaxation: Optional[Relaxation]
    guesses: List[Tuple[float, str, float]]

    @property
    def frac(self) -> Optional[FractionalMlufl]:
        return self.relaxation.frac if self.relaxation else None


def solve_lp_norm_relaxation(
    inst: Instance, ts: TimeScale, p: float, max_rounds: Optional[int] = None
) -> NormRelaxation:
    """Guess the latency norm in powers of two; keep the guess minimising
    facility + connection + guess"""
    if p < 1:
        raise ValueError(f"norm exponent must be >= 1, got {p}")
    top = float(inst.client_weight.sum()) ** (1.0 / p) * ts.horizon
    guesses = []
    best: Optional[NormRelaxation] = None
    for g in range(0, max(int(math.ceil(math.log2(max(top, 1.0)))), 0) + 1):
        cap = 2.0 ** g
        options = MluflLpOptions(latency_cap=cap, norm_p=p)
        relaxation = solve_mlufl_relaxation(inst, ts, options, max_rounds)
        value = relaxation.value + cap if relaxation.is_optimal else INF
        guesses.append((cap, relaxation.solution.status.value, value))
        logger.debug("norm guess %g: %s, value %.6g", cap, relaxation.solution.status.value, value)
        if relaxation.is_optimal and (best is None or value < best.value - 1e-12):
            best = NormRelaxation(cap, value, relaxation, guesses)
    if best is None:
        raise RoundingError("NO_FEASIBLE_GUESS", "no latency-norm guess gave a feasible LP")
    best.guesses = guesses
    return best


# ---------------------------------------------------------------------------
# Uniform time metric
# ---------------------------------------------------------------------------


def build_uniform_lp(inst: Instance, route_count: Optional[int] = None) -> Tuple[LpModel, TimeScale]:
    """Slot LP: times 1..n, at most k facilities per slot"""
    k = route_count or inst.route_count
    n, m = inst.n, inst.m
    ts = TimeScale.full(n)
    model = LpModel("uniform")
    for i in range(n):
        for r in range(n):
            model.add_variable("y", (i, r), cost=float(inst.facility_cost[i]))
    for j in range(m):
        for i in range(n):
            if not math.isfinite(inst.connection_cost[i, j]):
                continue
            for r, t in enumerate(ts.times):
                cost = float(inst.connection_cost[i, j]) + float(inst.client_weight[j]) * inst.latency(t)
                model.add_variable("x", (i, j, r), cost=cost)
    for j in range(m):
        cols = [model.var("x", (i, j, r)) for i in range(n) for r in range(n)]
        model.add_constraint({c: 1.0 for c in cols if c is not None}, Sense.GE, 1.0, f"cover_{j}")
    for kx, var in enumerate(model.variables):
        if var.block == "x":
            i, j, r = var.index
            model.add_constraint({kx: 1.0, model.var("y", (i, r)): -1.0}, Sense.LE, 0.0, f"link_{i}_{j}_{r}")
    for r in range(n):
        model.add_constraint({model.var("y", (i, r)): 1.0 for i in range(n)}, Sense.LE, float(k), f"slot_{r}")
    return model, ts


def uniform_fractional(inst: Instance, ts: TimeScale, solution: LpSolution) -> FractionalMlufl:
    n, m, T = inst.n, inst.m, len(ts)
    x = np.zeros((n, m, T))
    y = np.zeros((n, T))
    for (i, j, r), value in solution.block_values("x").items():
        x[i, j, r] = value
    for (i, r), value in solution.block_values("y").items():
        y[i, r] = value
    return FractionalMlufl(
        times=ts.as_array(),
        x=np.clip(x, 0.0, None),
        y=np.clip(y, 0.0, None),
        connection_cost=np.array(inst.connection_cost),
        weights=np.array(inst.client_weight),
        latency=inst.latency,
    )


def solve_uniform_relaxation(inst: Instance, route_count: Optional[int] = None) -> Relaxation:
    model, ts = build_uniform_lp(inst, route_count)
    solution = solve_lp(model)
    if solution.status != LpStatus.OPTIMAL:
        logger.warning("uniform LP ended with status %s", solution.status.value)
        return Relaxation(solution, None, ts)
    return Relaxation(solution, uniform_fractional(inst, ts, solution), ts)

