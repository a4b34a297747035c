"""
Seeded random instance generators

Families:
- euclidean: points in a square, d and c both Euclidean
- related: connection metric c over F ∪ D ∪ {r}, time metric d = c / M
- uniform: d = 1 between distinct nodes, arbitrary connection costs
- metric-uniform: d = 1, Euclidean connection metric
- zfc: metric-uniform with zero opening costs
- mgl: Euclidean d, zero opening costs, c in {0, inf} encoding groups
"""

from enum import Enum
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, PositiveFloat, PositiveInt, model_validator

from .errors import InstanceError
from .instance import INF, Instance, LatencyFunction
from .seeding import make_rng


class Family(str, Enum):
    EUCLIDEAN = "euclidean"
    RELATED = "related"
    UNIFORM = "uniform"
    METRIC_UNIFORM = "metric-uniform"
    ZFC = "zfc"
    MGL = "mgl"


class GenSpec(BaseModel):
    """Pydantic model describing an instance family and its sizes"""

    family: Family = Field(..., description="Instance family.")
    n: PositiveInt = Field(..., description="Number of facilities.")
    m: PositiveInt = Field(..., description="Number of clients.")
    scale: PositiveFloat = Field(default=10.0, description="Side of the square holding the points.")
    related_scale: float = Field(default=1.0, ge=1.0, description="M in d = c / M (related family).")
    facility_cost_range: Tuple[float, float] = Field(default=(0.0, 10.0))
    integral: bool = Field(default=False, description="Round Euclidean distances up to integers.")
    group_size: PositiveInt = Field(default=2, description="Facilities per client group (mgl family).")
    disjoint_groups: bool = Field(default=False)
    route_count: PositiveInt = Field(default=1)
    route_budget: Optional[PositiveFloat] = Field(default=None)
    weights: Literal["unit", "random"] = Field(default="unit")
    latency_p: float = Field(default=1.0, ge=1.0)

    @model_validator(mode="after")
    def validate_sizes(self) -> "GenSpec":
        lo, hi = self.facility_cost_range
        if lo < 0 or hi < lo:
            raise ValueError(f"facility_cost_range must satisfy 0 <= lo <= hi, got {self.facility_cost_range}")
        if self.family == Family.MGL:
            if self.group_size > self.n:
                raise ValueError(f"group_size {self.group_size} exceeds n={self.n}")
            if self.disjoint_groups and self.group_size * self.m > self.n:
                raise ValueError(
                    f"{self.m} disjoint groups of size {self.group_size} need at least "
                    f"{self.group_size * self.m} facilities, got {self.n}"
                )
        return self


def _euclidean(points: np.ndarray, integral: bool) -> np.ndarray:
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    if integral:
        dist = np.ceil(dist - 1e-9)
    np.fill_diagonal(dist, 0.0)
    return dist


def _uniform_metric(size: int) -> np.ndarray:
    return 1.0 - np.eye(size)


def generate(spec: GenSpec, seed: int) -> Instance:
    """Build a valid instance; identical (spec, seed) gives an identical instance"""
    n, m = spec.n, spec.m
    if spec.family == Family.MGL and spec.disjoint_groups and spec.group_size * m > n:
        raise InstanceError("INFEASIBLE_SPEC", "not enough facilities for disjoint groups", field="group_size")

    rng = make_rng(seed)
    points = rng.uniform(0.0, spec.scale, size=(n + 1 + m, 2))
    full = _euclidean(points, spec.integral)
    lo, hi = spec.facility_cost_range
    f = rng.uniform(lo, hi, size=n)
    weights = rng.uniform(0.5, 2.0, size=m) if spec.weights == "random" else np.ones(m)
    latency = LatencyFunction.power(spec.latency_p) if spec.latency_p > 1 else LatencyFunction.identity()
    common = dict(
        client_weight=weights,
        route_count=spec.route_count,
        route_budget=INF if spec.route_budget is None else spec.route_budget,
        latency=latency,
    )
    metric_block = full[:n, n + 1:]

    if spec.family == Family.EUCLIDEAN:
        return Instance(f, metric_block, full[: n + 1, : n + 1], tags=("euclidean",), full_metric=full, **common)

    if spec.family == Family.RELATED:
        scale = spec.related_scale
        return Instance(
            f,
            metric_block,
            full[: n + 1, : n + 1] / scale,
            tags=("related",),
            related_scale=scale,
            full_metric=full,
            **common,
        )

    if spec.family == Family.UNIFORM:
        c = rng.uniform(0.0, spec.scale, size=(n, m))
        if spec.integral:
            c = np.ceil(c)
        return Instance(f, c, _uniform_metric(n + 1), tags=("uniform",), **common)

    if spec.family == Family.METRIC_UNIFORM:
        return Instance(
            f, metric_block, _uniform_metric(n + 1), tags=("uniform", "metric"), full_metric=full, **common
        )

    if spec.family == Family.ZFC:
        return Instance(
            np.zeros(n),
            metric_block,
            _uniform_metric(n + 1),
            tags=("uniform", "zfc", "metric"),
            full_metric=full,
            **common,
        )

    # mgl
    c = np.full((n, m), INF)
    if spec.disjoint_groups:
        order = rng.permutation(n)
        for j in range(m):
            c[order[j * spec.group_size:(j + 1) * spec.group_size], j] = 0.0
    else:
        for j in range(m):
            c[rng.choice(n, size=spec.group_size, replace=False), j] = 0.0
    return Instance(np.zeros(n), c, full[: n + 1, : n + 1], tags=("mgl",), **common)
