"""
MLUFL problem data model

Holds the instance, solution and cost-breakdown types, the exact objective
evaluator and the JSON instance file format.

Node convention: facilities are ``0..n-1`` and the root is ``n`` in the time
metric ``d``. Instances that carry a full connection metric (related and
metric-uniform families) index it as facilities ``0..n-1``, root ``n`` and
clients ``n+1..n+m``.
"""

import csv
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from jsonschema import Draft7Validator

from .errors import InstanceError, SolutionError

INF = math.inf

_FLOAT_FORMAT = "{:.12g}"


class LatencyKind(str, Enum):
    IDENTITY = "identity"
    POWER = "power"
    TABLE = "table"


@dataclass(frozen=True)
class LatencyFunction:
    """Monotone latency function λ(t) applied to activation times"""

    kind: LatencyKind = LatencyKind.IDENTITY
    p: float = 1.0
    table: Tuple[Tuple[float, float], ...] = ()

    @classmethod
    def identity(cls) -> "LatencyFunction":
        return cls()

    @classmethod
    def power(cls, p: float) -> "LatencyFunction":
        if p < 1:
            raise InstanceError("BAD_LATENCY", f"power latency needs p >= 1, got {p}", field="latency.p")
        return cls(kind=LatencyKind.POWER, p=float(p))

    @classmethod
    def from_table(cls, points: Sequence[Sequence[float]]) -> "LatencyFunction":
        pts = tuple(sorted((float(t), float(v)) for t, v in points))
        if not pts:
            raise InstanceError("BAD_LATENCY", "latency table is empty", field="latency.table")
        values = [v for _, v in pts]
        if any(b < a for a, b in zip(values, values[1:])):
            raise InstanceError("BAD_LATENCY", "latency table must be nondecreasing", field="latency.table")
        return cls(kind=LatencyKind.TABLE, table=pts)

    @property
    def growth(self) -> float:
        """Growth exponent p with λ(cx) <= c^p λ(x)"""
        return self.p if self.kind == LatencyKind.POWER else 1.0

    def __call__(self, t: float) -> float:
        if self.kind == LatencyKind.IDENTITY:
            return float(t)
        if self.kind == LatencyKind.POWER:
            return float(t) ** self.p
        ts = [a for a, _ in self.table]
        vs = [b for _, b in self.table]
        if len(ts) == 1:
            return vs[0]
        if t <= ts[-1]:
            return float(np.interp(t, ts, vs))
        slope = (vs[-1] - vs[-2]) / (ts[-1] - ts[-2]) if ts[-1] > ts[-2] else 0.0
        return vs[-1] + slope * (t - ts[-1])

    def values(self, times: Sequence[float]) -> np.ndarray:
        return np.array([self(t) for t in times], dtype=float)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"kind": self.kind.value}
        if self.kind == LatencyKind.POWER:
            data["p"] = self.p
        if self.kind == LatencyKind.TABLE:
            data["table"] = [list(pt) for pt in self.table]
        return data

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "LatencyFunction":
        if not data:
            return cls()
        kind = data.get("kind", "identity")
        if kind == LatencyKind.POWER.value:
            return cls.power(data.get("p", 1.0))
        if kind == LatencyKind.TABLE.value:
            return cls.from_table(data.get("table", []))
        return cls()


def _frozen(array: Any, ndim: int, name: str) -> np.ndarray:
    out = np.array(array, dtype=float, copy=True)
    if out.ndim != ndim:
        raise InstanceError("SHAPE_ERROR", f"expected a {ndim}-d array, got shape {out.shape}", field=name)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Instance:
    """An MLUFL instance; immutable once built"""

    facility_cost: np.ndarray
    connection_cost: np.ndarray
    time_metric: np.ndarray
    client_weight: Optional[np.ndarray] = None
    route_count: int = 1
    route_budget: float = INF
    latency: LatencyFunction = field(default_factory=LatencyFunction)
    tags: Tuple[str, ...] = ()
    related_scale: Optional[float] = None
    full_metric: Optional[np.ndarray] = None

    def __post_init__(self):
        f = _frozen(self.facility_cost, 1, "f")
        n = f.shape[0]
        if n == 0:
            raise InstanceError("EMPTY_FACILITY_SET", "empty facility set", field="n")
        c = _frozen(self.connection_cost, 2, "c")
        if c.shape[0] != n:
            raise InstanceError("SHAPE_ERROR", f"c needs {n} rows, got {c.shape[0]}", field="c")
        m = c.shape[1]
        if m == 0:
            raise InstanceError("EMPTY_CLIENT_SET", "empty client set", field="m")
        d = _frozen(self.time_metric, 2, "d")
        if d.shape != (n + 1, n + 1):
            raise InstanceError("SHAPE_ERROR", f"d must be {(n + 1, n + 1)}, got {d.shape}", field="d")
        weight = np.ones(m) if self.client_weight is None else self.client_weight
        w = _frozen(weight, 1, "lambda")
        if w.shape[0] != m:
            raise InstanceError("SHAPE_ERROR", f"lambda needs {m} entries", field="lambda")
        if self.route_count < 1:
            raise InstanceError("BAD_ROUTES", "route count k must be at least 1", field="k")
        full = None
        if self.full_metric is not None:
            full = _frozen(self.full_metric, 2, "metric")
            if full.shape != (n + 1 + m, n + 1 + m):
                raise InstanceError("SHAPE_ERROR", f"metric must be {(n + 1 + m, n + 1 + m)}", field="metric")
        object.__setattr__(self, "facility_cost", f)
        object.__setattr__(self, "connection_cost", c)
        object.__setattr__(self, "time_metric", d)
        object.__setattr__(self, "client_weight", w)
        object.__setattr__(self, "full_metric", full)
        object.__setattr__(self, "tags", tuple(self.tags))
        object.__setattr__(self, "route_budget", float(self.route_budget))

    # -- sizes -----------------------------------------------------------

    @property
    def n(self) -> int:
        return self.facility_cost.shape[0]

    @property
    def m(self) -> int:
        return self.connection_cost.shape[1]

    @property
    def root(self) -> int:
        return self.n

    @property
    def d_max(self) -> float:
        return float(self.time_metric.max())

    # -- tags ------------------------------------------------------------

    def has_tag(self, tag: str) -> bool:
        return tag in self.tags

    @property
    def is_uniform(self) -> bool:
        return self.has_tag("uniform")

    @property
    def is_related(self) -> bool:
        return self.has_tag("related")

    @property
    def is_mgl(self) -> bool:
        return self.has_tag("mgl")

    def groups(self) -> List[List[int]]:
        """Group G_j = facilities with zero connection cost to client j"""
        return [list(np.flatnonzero(self.connection_cost[:, j] == 0)) for j in range(self.m)]

    # -- metrics ---------------------------------------------------------

    def client_node(self, j: int) -> int:
        """Index of client j in the full connection metric"""
        return self.n + 1 + j

    def facility_distance(self, i: int, k: int) -> float:
        """Connection-metric distance between two facilities"""
        if i == k:
            return 0.0
        if self.full_metric is not None:
            return float(self.full_metric[i, k])
        return float(np.min(self.connection_cost[i] + self.connection_cost[k]))

    def client_distance(self, j: int, k: int) -> float:
        """Connection-metric distance between two clients"""
        if j == k:
            return 0.0
        if self.full_metric is not None:
            return float(self.full_metric[self.client_node(j), self.client_node(k)])
        return float(np.min(self.connection_cost[:, j] + self.connection_cost[:, k]))

    def with_zero_facility_costs(self) -> "Instance":
        return replace(self, facility_cost=np.zeros(self.n))

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "n": self.n,
            "m": self.m,
            "f": self.facility_cost.tolist(),
            "c": [[None if math.isinf(v) else v for v in row] for row in self.connection_cost.tolist()],
            "d": self.time_metric.tolist(),
            "tags": list(self.tags),
            "lambda": self.client_weight.tolist(),
            "k": self.route_count,
            "B": None if math.isinf(self.route_budget) else self.route_budget,
            "latency": self.latency.to_dict(),
        }
        if self.related_scale is not None:
            data["M"] = self.related_scale
        if self.full_metric is not None:
            data["metric"] = self.full_metric.tolist()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Instance":
        n, m = data["n"], data["m"]
        if n == 0:
            raise InstanceError("EMPTY_FACILITY_SET", "empty facility set", field="n")
        if len(data["f"]) != n:
            raise InstanceError("SHAPE_ERROR", f"f needs {n} entries", field="f")
        if len(data["c"]) != n or any(len(row) != m for row in data["c"]):
            raise InstanceError("SHAPE_ERROR", f"c must be {n} x {m}", field="c")
        if len(data["d"]) != n + 1 or any(len(row) != n + 1 for row in data["d"]):
            raise InstanceError("SHAPE_ERROR", f"d must be {n + 1} x {n + 1}", field="d")
        c = np.array([[INF if v is None else v for v in row] for row in data["c"]], dtype=float)
        budget = data.get("B")
        return cls(
            facility_cost=np.array(data["f"], dtype=float),
            connection_cost=c.reshape(n, m),
            time_metric=np.array(data["d"], dtype=float),
            client_weight=None if data.get("lambda") is None else np.array(data["lambda"], dtype=float),
            route_count=int(data.get("k", 1)),
            route_budget=INF if budget is None else float(budget),
            latency=LatencyFunction.from_dict(data.get("latency")),
            tags=tuple(data.get("tags", [])),
            related_scale=data.get("M"),
            full_metric=None if data.get("metric") is None else np.array(data["metric"], dtype=float),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(json.dumps(self.to_dict(), sort_keys=True))


# ---------------------------------------------------------------------------
# Solutions and evaluation
# ---------------------------------------------------------------------------


@dataclass
class Solution:
    """Routes of open facilities plus a client assignment.

    Every route starts at the root, which is implicit: ``routes[q]`` lists
    the facilities of route q in visiting order.
    """

    routes: List[List[int]]
    assignment: List[int]

    @property
    def open_set(self) -> frozenset:
        return frozenset(i for route in self.routes for i in route)

    @property
    def order(self) -> List[int]:
        """Facilities of a single-route solution in visiting order"""
        return [i for route in self.routes for i in route]

    def route_nodes(self, inst: Instance) -> List[List[int]]:
        return [[inst.root] + list(route) for route in self.routes]

    def activation_times(self, inst: Instance) -> np.ndarray:
        """Prefix d-length of every facility along its route (inf if closed)"""
        times = np.full(inst.n, INF)
        for route in self.route_nodes(inst):
            elapsed = 0.0
            for prev, cur in zip(route, route[1:]):
                elapsed += float(inst.time_metric[prev, cur])
                times[cur] = elapsed
        return times

    def route_lengths(self, inst: Instance) -> List[float]:
        lengths = []
        for route in self.route_nodes(inst):
            lengths.append(float(sum(inst.time_metric[a, b] for a, b in zip(route, route[1:]))))
        return lengths

    def to_dict(self) -> Dict[str, Any]:
        return {"routes": [list(map(int, r)) for r in self.routes], "assignment": list(map(int, self.assignment))}


@dataclass(frozen=True)
class EvalMode:
    """Objective mode: sum of weighted latencies, or their L_p norm"""

    norm_p: Optional[float] = None


@dataclass
class ClientRecord:
    client: int
    facility: int
    connection: float
    activation_time: float
    latency: float


@dataclass
class CostBreakdown:
    facility_cost: float
    connection_cost: float
    latency_cost: float
    total: float
    records: List[ClientRecord]
    route_lengths: List[float]
    budget_factor: float = 0.0
    latency_norm: Optional[float] = None

    def rows(self) -> List[List[str]]:
        header = ["client", "facility", "connection", "activation_time", "latency"]
        body = [
            [str(r.client), str(r.facility), _fmt(r.connection), _fmt(r.activation_time), _fmt(r.latency)]
            for r in self.records
        ]
        return [header] + body

    def write_csv(self, path: Union[str, Path]) -> None:
        write_rows(path, self.rows())


def _fmt(value: float) -> str:
    return _FLOAT_FORMAT.format(value)


def write_rows(path: Union[str, Path], rows: Sequence[Sequence[Any]]) -> None:
    """Write CSV rows with a fixed line terminator"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        for row in rows:
            writer.writerow(row)


def evaluate(inst: Instance, sol: Solution, mode: EvalMode = EvalMode()) -> CostBreakdown:
    """Exact cost of a solution"""
    if len(sol.routes) < 1:
        raise SolutionError("NO_ROUTES", "solution has no routes")
    if len(sol.assignment) != inst.m:
        raise SolutionError("BAD_ASSIGNMENT", f"assignment needs {inst.m} entries, got {len(sol.assignment)}")
    seen: set = set()
    for route in sol.routes:
        for i in route:
            if not 0 <= i < inst.n:
                raise SolutionError("BAD_FACILITY", f"route visits unknown facility {i}")
            if i in seen:
                raise SolutionError("DUPLICATE_FACILITY", f"facility {i} appears more than once in the routes")
            seen.add(i)

    times = sol.activation_times(inst)
    facility_cost = float(sum(inst.facility_cost[i] for i in seen))
    records: List[ClientRecord] = []
    connection_cost = 0.0
    weighted_latency = 0.0
    powered = 0.0
    for j, i in enumerate(sol.assignment):
        if i not in seen:
            raise SolutionError(
                "UNOPENED_FACILITY",
                f"client {j} is assigned to facility {i} which is not open",
                "assign clients only to facilities that appear in a route",
            )
        c = float(inst.connection_cost[i, j])
        if math.isinf(c):
            raise SolutionError("INFINITE_CONNECTION", f"client {j} cannot be served by facility {i}")
        t = float(times[i])
        lat = float(inst.client_weight[j]) * inst.latency(t)
        records.append(ClientRecord(j, int(i), c, t, lat))
        connection_cost += c
        weighted_latency += lat
        if mode.norm_p is not None:
            powered += float(inst.client_weight[j]) * t ** mode.norm_p

    latency_norm = None
    latency_cost = weighted_latency
    if mode.norm_p is not None:
        latency_norm = powered ** (1.0 / mode.norm_p)
        latency_cost = latency_norm

    lengths = sol.route_lengths(inst)
    budget_factor = 0.0 if math.isinf(inst.route_budget) else max(lengths) / max(inst.route_budget, 1e-300)
    total = facility_cost + connection_cost + latency_cost
    return CostBreakdown(
        facility_cost=facility_cost,
        connection_cost=connection_cost,
        latency_cost=latency_cost,
        total=total,
        records=records,
        route_lengths=lengths,
        budget_factor=budget_factor,
        latency_norm=latency_norm,
    )


def best_assignment(inst: Instance, routes: List[List[int]]) -> List[int]:
    """Assign each client to the open facility minimising c + λ_j·λ(t)"""
    sol = Solution(routes=routes, assignment=[])
    times = sol.activation_times(inst)
    open_list = sorted(sol.open_set)
    if not open_list:
        raise SolutionError("NO_OPEN_FACILITY", "no facility is open")
    assignment = []
    for j in range(inst.m):
        best = min(
            open_list,
            key=lambda i: (
                inst.connection_cost[i, j] + inst.client_weight[j] * inst.latency(times[i]),
                times[i],
                i,
            ),
        )
        assignment.append(int(best))
    return assignment


# ---------------------------------------------------------------------------
# Instance files
# ---------------------------------------------------------------------------

_NUMBER = {"type": "number", "minimum": 0}
_NULLABLE_NUMBER = {"type": ["number", "null"], "minimum": 0}
_MATRIX = {"type": "array", "items": {"type": "array", "items": _NUMBER}}

INSTANCE_SCHEMA: Dict[str, Any] = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["n", "m", "f", "c", "d"],
    "properties": {
        "n": {"type": "integer", "minimum": 0},
        "m": {"type": "integer", "minimum": 1},
        "f": {"type": "array", "items": _NUMBER},
        "c": {"type": "array", "items": {"type": "array", "items": _NULLABLE_NUMBER}},
        "d": _MATRIX,
        "tags": {"type": "array", "items": {"type": "string"}},
        "lambda": {"type": ["array", "null"], "items": _NUMBER},
        "k": {"type": "integer", "minimum": 1},
        "B": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "M": {"type": ["number", "null"], "minimum": 1},
        "metric": {"type": ["array", "null"], "items": {"type": "array", "items": _NUMBER}},
        "latency": {
            "type": "object",
            "properties": {
                "kind": {"enum": [k.value for k in LatencyKind]},
                "p": {"type": "number", "minimum": 1},
                "table": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
            },
            "required": ["kind"],
        },
    },
}

_VALIDATOR = Draft7Validator(INSTANCE_SCHEMA)


def parse_instance(text: str) -> Instance:
    """Parse instance file contents"""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InstanceError("PARSE_ERROR", e.msg, line=e.lineno, suggestion="the file must be a JSON object")
    if isinstance(data, dict) and data.get("n") == 0:
        raise InstanceError("EMPTY_FACILITY_SET", "empty facility set", field="n")
    errors = sorted(_VALIDATOR.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        first = errors[0]
        path = "/".join(str(p) for p in first.absolute_path) or "<root>"
        raise InstanceError("SCHEMA_ERROR", first.message, field=path)
    return Instance.from_dict(data)


def read_instance(path: Union[str, Path]) -> Instance:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InstanceError("READ_ERROR", f"cannot read {path}: {e.strerror}", suggestion="check the instance path")
    return parse_instance(text)


def dump_instance(inst: Instance) -> str:
    return json.dumps(inst.to_dict(), indent=2) + "\n"


def write_instance(inst: Instance, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_instance(inst), encoding="utf-8")
