"""
LP core: sparse LP models, a dense two-phase tableau simplex, max-flow /
min-cut on small networks and a cutting-plane driver whose rounds are
re-optimised from the previous basis by dual simplex pivots.

All LPs are minimisation problems. Row duals follow the usual sign
convention for minimisation: >= rows have nonnegative duals, <= rows
nonpositive ones.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Hashable, Iterable, List, Mapping, Optional, Protocol, Sequence, Tuple

import networkx as nx
import numpy as np
from networkx.algorithms.flow import edmonds_karp

from .config import Config, Tolerances
from .errors import LpError

logger = logging.getLogger(__name__)

INF = math.inf


class Sense(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration-limit"
    PARTIAL = "partial"


@dataclass
class Variable:
    block: str
    index: Tuple
    cost: float = 0.0
    lower: float = 0.0
    upper: float = INF

    @property
    def name(self) -> str:
        parts = "_".join(str(p).replace(".", "p").replace("-", "m") for p in self.index)
        return f"{self.block}_{parts}" if parts else self.block


@dataclass
class Constraint:
    coefficients: Dict[int, float]
    sense: Sense
    rhs: float
    name: str = ""

    def activity(self, values: np.ndarray) -> float:
        return float(sum(a * values[k] for k, a in self.coefficients.items()))

    def violation(self, values: np.ndarray) -> float:
        """Amount by which the row is violated at ``values`` (0 if satisfied)"""
        lhs = self.activity(values)
        if self.sense == Sense.GE:
            return max(0.0, self.rhs - lhs)
        if self.sense == Sense.LE:
            return max(0.0, lhs - self.rhs)
        return abs(lhs - self.rhs)


class LpModel:
    """Minimisation LP with named variable blocks and sparse rows"""

    def __init__(self, name: str = "lp"):
        self.name = name
        self.variables: List[Variable] = []
        self.constraints: List[Constraint] = []
        self._lookup: Dict[Tuple[str, Tuple], int] = {}

    # -- building --------------------------------------------------------

    def add_variable(
        self, block: str, index: Tuple = (), cost: float = 0.0, lower: float = 0.0, upper: float = INF
    ) -> int:
        key = (block, tuple(index))
        if key in self._lookup:
            raise LpError("DUPLICATE_VARIABLE", f"variable {block}{tuple(index)} already exists")
        if upper < lower:
            raise LpError("BAD_BOUNDS", f"variable {block}{tuple(index)} has upper < lower")
        self.variables.append(Variable(block, tuple(index), float(cost), float(lower), float(upper)))
        self._lookup[key] = len(self.variables) - 1
        return len(self.variables) - 1

    def var(self, block: str, index: Tuple = ()) -> Optional[int]:
        return self._lookup.get((block, tuple(index)))

    def block(self, block: str) -> List[int]:
        return [k for k, v in enumerate(self.variables) if v.block == block]

    def add_constraint(
        self, coefficients: Mapping[int, float], sense: Sense, rhs: float, name: str = ""
    ) -> int:
        row: Dict[int, float] = {}
        for k, a in coefficients.items():
            if not 0 <= k < len(self.variables):
                raise LpError("BAD_COLUMN", f"row {name or len(self.constraints)} references column {k}")
            if a != 0:
                row[k] = row.get(k, 0.0) + float(a)
        self.constraints.append(Constraint(row, Sense(sense), float(rhs), name))
        return len(self.constraints) - 1

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def copy(self) -> "LpModel":
        clone = LpModel(self.name)
        clone.variables = [Variable(v.block, v.index, v.cost, v.lower, v.upper) for v in self.variables]
        clone.constraints = [Constraint(dict(c.coefficients), c.sense, c.rhs, c.name) for c in self.constraints]
        clone._lookup = dict(self._lookup)
        return clone

    def to_arrays(self) -> Tuple[np.ndarray, np.ndarray, List[Sense], np.ndarray, np.ndarray, np.ndarray]:
        n = len(self.variables)
        c = np.array([v.cost for v in self.variables], dtype=float)
        A = np.zeros((len(self.constraints), n))
        for r, row in enumerate(self.constraints):
            for k, a in row.coefficients.items():
                A[r, k] = a
        b = np.array([row.rhs for row in self.constraints], dtype=float)
        lower = np.array([v.lower for v in self.variables], dtype=float)
        upper = np.array([v.upper for v in self.variables], dtype=float)
        return c, A, [row.sense for row in self.constraints], b, lower, upper

    def objective_value(self, values: np.ndarray) -> float:
        return float(sum(v.cost * values[k] for k, v in enumerate(self.variables)))

    # -- debugging -------------------------------------------------------

    def to_lp_format(self) -> str:
        """Dump the model in CPLEX LP text format"""

        def term(a: float, name: str, first: bool) -> str:
            sign = "-" if a < 0 else ("" if first else "+")
            return f"{sign} {abs(a):.12g} {name}".strip()

        lines = [f"\\ {self.name}", "Minimize"]
        obj = [term(v.cost, v.name, i == 0) for i, v in enumerate(v for v in self.variables if v.cost != 0)]
        lines.append(" obj: " + (" ".join(obj) if obj else "0"))
        lines.append("Subject To")
        for r, row in enumerate(self.constraints):
            items = sorted(row.coefficients.items())
            body = " ".join(term(a, self.variables[k].name, i == 0) for i, (k, a) in enumerate(items)) or "0"
            op = {Sense.LE: "<=", Sense.GE: ">=", Sense.EQ: "="}[row.sense]
            label = (row.name or f"r{r}").replace(" ", "_")
            lines.append(f" {label}: {body} {op} {row.rhs:.12g}")
        lines.append("Bounds")
        for v in self.variables:
            lo = "-inf" if math.isinf(v.lower) else f"{v.lower:.12g}"
            hi = "+inf" if math.isinf(v.upper) else f"{v.upper:.12g}"
            lines.append(f" {lo} <= {v.name} <= {hi}")
        lines.append("End")
        return "\n".join(lines) + "\n"


@dataclass
class LpSolution:
    status: LpStatus
    values: np.ndarray
    objective: float
    duals: np.ndarray
    dual_objective: float
    iterations: int
    model: LpModel
    slackness_residual: float = 0.0
    rounds: int = 0
    cuts_added: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == LpStatus.OPTIMAL

    def value(self, block: str, index: Tuple = ()) -> float:
        k = self.model.var(block, index)
        return 0.0 if k is None else float(self.values[k])

    def block_values(self, block: str) -> Dict[Tuple, float]:
        return {self.model.variables[k].index: float(self.values[k]) for k in self.model.block(block)}

    def max_violation(self) -> float:
        if not self.model.constraints:
            return 0.0
        return max(row.violation(self.values) for row in self.model.constraints)


# ---------------------------------------------------------------------------
# Simplex
# ---------------------------------------------------------------------------


class _Tableau:
    """Dense tableau with a reduced-cost row; rhs is the last column"""

    DEGENERATE_STREAK = 50

    def __init__(self, T: np.ndarray, basis: List[int], max_iterations: int):
        self.T = T
        self.basis = basis
        self.d = np.zeros(T.shape[1])
        self.iterations = 0
        self.max_iterations = max_iterations
        self.bland = False
        self._streak = 0

    @property
    def width(self) -> int:
        return self.T.shape[1] - 1

    def price(self, cost: np.ndarray) -> None:
        full = np.append(cost, 0.0)
        cb = full[self.basis] if self.basis else np.zeros(0)
        self.d = full - (cb @ self.T if self.basis else 0.0)

    def pivot(self, r: int, e: int) -> None:
        T = self.T
        T[r, :] /= T[r, e]
        col = T[:, e].copy()
        col[r] = 0.0
        rows = np.flatnonzero(col)
        if rows.size:
            cols = np.flatnonzero(T[r, :])
            T[np.ix_(rows, cols)] -= np.outer(col[rows], T[r, cols])
        self.d -= self.d[e] * T[r, :]
        T[:, e] = 0.0
        T[r, e] = 1.0
        self.d[e] = 0.0
        self.basis[r] = e

    def run(self, allowed: np.ndarray) -> LpStatus:
        """Primal simplex from a feasible basis"""
        T = self.T
        while True:
            if self.iterations >= self.max_iterations:
                return LpStatus.ITERATION_LIMIT
            reduced = self.d[:-1]
            candidates = np.flatnonzero(allowed & (reduced < -Tolerances.PIVOT))
            if candidates.size == 0:
                return LpStatus.OPTIMAL
            if self.bland:
                e = int(candidates[0])
            else:
                e = int(candidates[np.argmin(reduced[candidates])])
            column = T[:, e]
            rows = np.flatnonzero(column > Tolerances.PIVOT)
            if rows.size == 0:
                return LpStatus.UNBOUNDED
            ratios = T[rows, -1] / column[rows]
            best = ratios.min()
            tied = rows[ratios <= best + 1e-12 * (1.0 + abs(best))]
            r = int(min(tied, key=lambda row: self.basis[row]))
            if best <= 1e-12:
                self._streak += 1
                if self._streak > self.DEGENERATE_STREAK and not self.bland:
                    logger.debug("switching to Bland's rule after %d degenerate pivots", self._streak)
                    self.bland = True
            else:
                self._streak = 0
            self.pivot(r, e)
            np.maximum(T[:, -1], 0.0, out=T[:, -1], where=T[:, -1] > -Tolerances.FEASIBILITY)
            self.iterations += 1

    def run_dual(self, allowed: np.ndarray) -> LpStatus:
        """Dual simplex from a dual feasible basis: the most negative basic
        value leaves, the entering column keeps every reduced cost >= 0"""
        T = self.T
        while True:
            if self.iterations >= self.max_iterations:
                return LpStatus.ITERATION_LIMIT
            rhs = T[:, -1]
            rows = np.flatnonzero(rhs < -Tolerances.FEASIBILITY)
            if rows.size == 0:
                np.maximum(T[:, -1], 0.0, out=T[:, -1])
                return LpStatus.OPTIMAL
            r = int(rows[np.argmin(rhs[rows])])
            row = T[r, :-1]
            cols = np.flatnonzero(allowed & (row < -Tolerances.PIVOT))
            if cols.size == 0:
                return LpStatus.INFEASIBLE
            ratios = np.maximum(self.d[cols], 0.0) / -row[cols]
            self.pivot(r, int(cols[np.argmin(ratios)]))
            self.iterations += 1

    def add_rows(self, A: np.ndarray, b: np.ndarray) -> List[int]:
        """Append rows ``A x + s = b`` with fresh basic slacks, expressed in
        the current basis; returns the slack columns"""
        k = A.shape[0]
        m_rows, width = self.T.shape[0], self.width
        T = np.zeros((m_rows + k, width + k + 1))
        T[:m_rows, :width] = self.T[:, :width]
        T[:m_rows, -1] = self.T[:, -1]
        new = T[m_rows:]
        new[:, : A.shape[1]] = A
        new[:, width:width + k] = np.eye(k)
        new[:, -1] = b
        if self.basis:
            new -= new[:, self.basis] @ T[:m_rows]
        self.T = T
        self.d = np.concatenate([self.d[:width], np.zeros(k), self.d[-1:]])
        slacks = list(range(width, width + k))
        self.basis.extend(slacks)
        return slacks


class SimplexSolver:
    """Two-phase primal simplex over one model (Dantzig pricing, Bland fallback).

    The optimal tableau is kept after ``solve``. Rows appended with
    ``add_rows`` are expressed in the final basis and ``reoptimize`` restores
    primal feasibility with dual simplex pivots. A warm result that is not
    optimal, or that fails the feasibility check, is redone from scratch.
    """

    def __init__(self, model: LpModel, max_iterations: Optional[int] = None):
        self.model = model
        self.max_iterations = max_iterations or Config.LP_MAX_ITERATIONS
        self.warm_solves = 0
        self.cold_solves = 0
        self._tab: Optional[_Tableau] = None
        self._stale = True

    def _build(self) -> None:
        c, A, senses, b, lower, upper = self.model.to_arrays()
        n = len(c)
        free = np.isneginf(lower)
        if np.any(free & np.isfinite(upper)):
            raise LpError("UNSUPPORTED_BOUNDS", "free variables with finite upper bounds are not supported")
        shift = np.where(free, 0.0, lower)

        # structural columns: x' = x - lower, plus a negated copy for free variables
        free_idx = np.flatnonzero(free)
        A_s = np.hstack([A, -A[:, free_idx]]) if free_idx.size else A.copy()
        c_s = np.concatenate([c, -c[free_idx]]) if free_idx.size else c.copy()
        b_s = b - A @ shift
        row_senses = list(senses)

        bounded = np.flatnonzero(np.isfinite(upper))
        if bounded.size:
            extra = np.zeros((bounded.size, A_s.shape[1]))
            extra[np.arange(bounded.size), bounded] = 1.0
            A_s = np.vstack([A_s, extra])
            b_s = np.concatenate([b_s, upper[bounded] - shift[bounded]])
            row_senses += [Sense.LE] * bounded.size

        m_rows, n_s = A_s.shape
        flip = np.where(b_s < 0, -1.0, 1.0)
        A_s = A_s * flip[:, None]
        b_s = b_s * flip
        senses_std = []
        for s, f in zip(row_senses, flip):
            if f < 0 and s != Sense.EQ:
                s = Sense.GE if s == Sense.LE else Sense.LE
            senses_std.append(s)

        n_slack = sum(1 for s in senses_std if s != Sense.EQ)
        n_art = sum(1 for s in senses_std if s != Sense.LE)
        width = n_s + n_slack + n_art
        T = np.zeros((m_rows, width + 1))
        T[:, :n_s] = A_s
        T[:, -1] = b_s
        basis: List[int] = []
        init_col: List[int] = []
        slack_at, art_at = n_s, n_s + n_slack
        artificial = np.zeros(width, dtype=bool)
        for r, s in enumerate(senses_std):
            if s == Sense.LE:
                T[r, slack_at] = 1.0
                basis.append(slack_at)
                init_col.append(slack_at)
                slack_at += 1
            else:
                if s == Sense.GE:
                    T[r, slack_at] = -1.0
                    slack_at += 1
                T[r, art_at] = 1.0
                artificial[art_at] = True
                basis.append(art_at)
                init_col.append(art_at)
                art_at += 1

        self._n, self._n_s = n, n_s
        self._c, self._c_s = c, c_s
        self._shift = shift
        self._const = float(c @ shift)
        self._free_idx = free_idx
        self._b = b_s
        self._flip = flip
        self._init_col = np.array(init_col, dtype=int)
        self._artificial = artificial
        self._model_rows = np.arange(self.model.num_constraints)
        self._scale = 1.0 + (float(np.abs(b_s).max()) if m_rows else 0.0)
        self._tab = _Tableau(T, basis, self.max_iterations)

    def solve(self) -> LpSolution:
        """Cold two-phase solve of the current model"""
        self._build()
        self.cold_solves += 1
        self._stale = True
        tab = self._tab
        artificial = self._artificial

        if artificial.any():
            tab.price(artificial.astype(float))
            status = tab.run(np.ones(tab.width, dtype=bool))
            if status == LpStatus.ITERATION_LIMIT:
                return _failed(self.model, status, tab.iterations)
            if -tab.d[-1] > Tolerances.FEASIBILITY * self._scale:
                logger.debug("phase one ended with infeasibility %.3g", -tab.d[-1])
                return _failed(self.model, LpStatus.INFEASIBLE, tab.iterations)
            for r in range(tab.T.shape[0]):
                if artificial[tab.basis[r]]:
                    row = np.abs(tab.T[r, :-1])
                    row[artificial] = 0.0
                    j = int(np.argmax(row))
                    if row[j] > Tolerances.PIVOT:
                        tab.pivot(r, j)

        cost = np.zeros(tab.width)
        cost[: self._n_s] = self._c_s
        tab.price(cost)
        status = tab.run(~artificial)
        if status != LpStatus.OPTIMAL:
            return _failed(self.model, status, tab.iterations)
        self._stale = False
        return self._solution()

    def add_rows(self, rows: Sequence[Constraint]) -> None:
        """Append rows to the model and, after an optimal solve, to the tableau"""
        for row in rows:
            self.model.add_constraint(row.coefficients, row.sense, row.rhs, row.name)
        if not rows or self._stale:
            return
        if any(row.sense == Sense.EQ for row in rows):
            self._stale = True
            return
        added = self.model.constraints[-len(rows):]
        A = np.zeros((len(added), self._n_s))
        b = np.zeros(len(added))
        sign = np.ones(len(added))
        for q, row in enumerate(added):
            for k, a in row.coefficients.items():
                A[q, k] += a
            b[q] = row.rhs - sum(a * self._shift[k] for k, a in row.coefficients.items())
            if row.sense == Sense.GE:
                sign[q] = -1.0
        if self._free_idx.size:
            A[:, self._n:] = -A[:, self._free_idx]
        A *= sign[:, None]
        b *= sign

        tab = self._tab
        start = tab.T.shape[0]
        slacks = tab.add_rows(A, b)
        self._artificial = np.concatenate([self._artificial, np.zeros(len(added), dtype=bool)])
        self._init_col = np.concatenate([self._init_col, np.array(slacks, dtype=int)])
        self._b = np.concatenate([self._b, b])
        self._flip = np.concatenate([self._flip, sign])
        self._model_rows = np.concatenate([self._model_rows, np.arange(start, start + len(added))])

    def reoptimize(self) -> LpSolution:
        """Solve again after ``add_rows``, from the kept basis when possible"""
        if self._stale:
            return self.solve()
        tab = self._tab
        tab.iterations = 0
        tab.bland = False
        allowed = ~self._artificial
        status = tab.run_dual(allowed)
        if status == LpStatus.OPTIMAL:
            status = tab.run(allowed)
        if status == LpStatus.OPTIMAL:
            solution = self._solution()
            if solution_feasible(solution):
                self.warm_solves += 1
                return solution
        logger.debug("%s: warm re-solve ended %s, solving from scratch", self.model.name, status.value)
        return self.solve()

    def _solution(self) -> LpSolution:
        tab, model = self._tab, self.model
        x_std = np.zeros(tab.width)
        x_std[tab.basis] = tab.T[:, -1]
        x_prime = x_std[: self._n].copy()
        if self._free_idx.size:
            x_prime[self._free_idx] -= x_std[self._n:self._n_s]
        values = x_prime + self._shift
        values = np.where(np.abs(values) < 1e-12, 0.0, values)

        y_std = -tab.d[self._init_col]
        dual_objective = float(y_std @ self._b) + self._const
        duals = (y_std * self._flip)[self._model_rows]

        objective = float(self._c @ values)
        residual = 0.0
        for r, row in enumerate(model.constraints):
            slack = row.activity(values) - row.rhs
            residual = max(residual, abs(duals[r] * slack))
        logger.debug(
            "%s: optimal after %d pivots, objective %.9g (dual %.9g)",
            model.name, tab.iterations, objective, dual_objective,
        )
        return LpSolution(
            status=LpStatus.OPTIMAL,
            values=values,
            objective=objective,
            duals=duals,
            dual_objective=dual_objective,
            iterations=tab.iterations,
            model=model,
            slackness_residual=residual,
        )


def solve_lp(model: LpModel, max_iterations: Optional[int] = None) -> LpSolution:
    """Two-phase primal simplex on a dense tableau (Dantzig pricing, Bland fallback)"""
    return SimplexSolver(model, max_iterations).solve()


def _failed(model: LpModel, status: LpStatus, iterations: int) -> LpSolution:
    logger.info("%s: simplex stopped with status %s after %d pivots", model.name, status.value, iterations)
    return LpSolution(
        status=status,
        values=np.zeros(model.num_variables),
        objective=INF if status == LpStatus.INFEASIBLE else -INF,
        duals=np.zeros(model.num_constraints),
        dual_objective=math.nan,
        iterations=iterations,
        model=model,
    )


# ---------------------------------------------------------------------------
# Max flow
# ---------------------------------------------------------------------------


@dataclass
class FlowNetwork:
    nodes: List[Hashable]
    arcs: List[Tuple[Hashable, Hashable, float]]
    source: Hashable
    sink: Hashable

    def __post_init__(self):
        for u, v, cap in self.arcs:
            if cap < 0:
                raise LpError("NEGATIVE_CAPACITY", f"arc ({u}, {v}) has negative capacity {cap}")

    def add_undirected(self, u: Hashable, v: Hashable, cap: float) -> None:
        self.arcs.append((u, v, cap))
        self.arcs.append((v, u, cap))

    def to_networkx(self) -> nx.DiGraph:
        graph = nx.DiGraph()
        graph.add_nodes_from(self.nodes)
        for u, v, cap in self.arcs:
            if graph.has_edge(u, v):
                graph[u][v]["capacity"] += float(cap)
            else:
                graph.add_edge(u, v, capacity=float(cap))
        return graph

    def cut_capacity(self, source_side: Iterable[Hashable]) -> float:
        side = set(source_side)
        return float(sum(cap for u, v, cap in self.arcs if u in side and v not in side))


@dataclass
class FlowResult:
    value: float
    source_side: frozenset
    flow: Dict[Tuple[Hashable, Hashable], float] = field(default_factory=dict)


def max_flow(net: FlowNetwork, tol: float = 1e-12) -> FlowResult:
    """Maximum flow by shortest augmenting paths, with a minimum cut.

    The returned source side is the largest minimum cut: every node that
    cannot reach the sink in the residual network.
    """
    graph = net.to_networkx()
    if net.source == net.sink:
        return FlowResult(0.0, frozenset(net.nodes))
    residual = edmonds_karp(graph, net.source, net.sink)
    value = float(residual.graph["flow_value"])

    reaches_sink = {net.sink}
    frontier = [net.sink]
    while frontier:
        v = frontier.pop()
        for u in residual.predecessors(v):
            if u in reaches_sink:
                continue
            arc = residual[u][v]
            if arc["capacity"] - arc["flow"] > tol:
                reaches_sink.add(u)
                frontier.append(u)
    source_side = frozenset(u for u in graph.nodes if u not in reaches_sink)

    flow = {
        (u, v): float(residual[u][v]["flow"])
        for u, v in graph.edges
        if residual[u][v]["flow"] > 0
    }
    return FlowResult(value, source_side, flow)


# ---------------------------------------------------------------------------
# Cutting planes
# ---------------------------------------------------------------------------


class SeparationOracle(Protocol):
    def __call__(self, model: LpModel, solution: LpSolution) -> List[Constraint]:
        """Rows violated by ``solution`` (empty when none)"""
        ...


def cutting_plane_solve(
    base: LpModel,
    oracle: SeparationOracle,
    max_rounds: Optional[int] = None,
    max_iterations: Optional[int] = None,
) -> LpSolution:
    """Re-solve ``base`` with oracle cuts appended until none are returned.

    Cuts are priced into the previous optimal basis and re-optimised with
    dual simplex pivots rather than solved from scratch.
    """
    max_rounds = Config.CUT_MAX_ROUNDS if max_rounds is None else max_rounds
    model = base.copy()
    solver = SimplexSolver(model, max_iterations)
    total_cuts = 0
    solution = solver.solve()
    for round_no in range(1, max_rounds + 1):
        if not solution.is_optimal:
            solution.rounds = round_no
            solution.cuts_added = total_cuts
            return solution
        cuts = oracle(model, solution)
        if not cuts:
            solution.rounds = round_no
            solution.cuts_added = total_cuts
            logger.info(
                "%s: no violated cuts after %d round(s), %d cut(s) added, value %.9g (%d warm, %d cold solves)",
                model.name, round_no, total_cuts, solution.objective, solver.warm_solves, solver.cold_solves,
            )
            return solution
        worst = max(cut.violation(solution.values) for cut in cuts)
        logger.debug("%s round %d: %d cut(s), worst violation %.3g", model.name, round_no, len(cuts), worst)
        solver.add_rows(cuts)
        total_cuts += len(cuts)
        solution = solver.reoptimize()

    logger.warning("%s: cut loop hit the round limit (%d)", model.name, max_rounds)
    solution.status = LpStatus.ITERATION_LIMIT if solution.is_optimal else solution.status
    solution.rounds = max_rounds
    solution.cuts_added = total_cuts
    return solution


def enumerate_min_cut(net: FlowNetwork) -> float:
    """Minimum s-t cut capacity by enumerating node subsets (tiny networks)"""
    others = [v for v in net.nodes if v not in (net.source, net.sink)]
    best = INF
    for mask in range(1 << len(others)):
        side = {net.source} | {v for b, v in enumerate(others) if mask >> b & 1}
        best = min(best, net.cut_capacity(side))
    return best


def solution_feasible(solution: LpSolution, tol: float = Tolerances.FEASIBILITY) -> bool:
    values = solution.values
    for k, v in enumerate(solution.model.variables):
        if values[k] < v.lower - tol or values[k] > v.upper + tol:
            return False
    return solution.max_violation() <= tol * (1.0 + max((abs(r.rhs) for r in solution.model.constraints), default=0))

