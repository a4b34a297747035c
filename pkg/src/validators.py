"""
Instance validators

These validators report metric violations, negative costs and tag
inconsistencies. They never raise: problems come back as a report.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .config import Tolerances
from .instance import Instance


@dataclass(frozen=True)
class ValidationError:
    """One problem with an instance field; `entry` locates it in a matrix"""

    field: str
    message: str
    suggestion: str = ""
    entry: Optional[Tuple[int, int]] = None

    @property
    def location(self) -> str:
        return self.field if self.entry is None else f"{self.field}[{self.entry[0]}, {self.entry[1]}]"

    def __str__(self):
        return f"{self.location}: {self.message}" + (f" ({self.suggestion})" if self.suggestion else "")

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"field": self.field, "message": self.message, "suggestion": self.suggestion}
        if self.entry is not None:
            data["entry"] = list(self.entry)
        return data


@dataclass
class ValidationReport:
    errors: List[ValidationError] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.errors

    def fields(self) -> List[str]:
        return [e.field for e in self.errors]

    def __bool__(self) -> bool:
        return self.valid


def _metric_errors(matrix: np.ndarray, name: str, tol: float) -> List[ValidationError]:
    errors = []
    if np.any(~np.isfinite(matrix)):
        errors.append(ValidationError(name, "metric contains non-finite entries"))
        return errors
    if np.any(matrix < -tol):
        errors.append(ValidationError(name, "metric has negative distances"))
    if np.any(np.abs(np.diag(matrix)) > tol):
        errors.append(ValidationError(name, "metric has nonzero diagonal"))
    asym = np.abs(matrix - matrix.T)
    if np.any(asym > tol):
        u, v = np.unravel_index(int(np.argmax(asym)), asym.shape)
        errors.append(ValidationError(name, "metric is not symmetric", entry=(int(u), int(v))))
    # shortest two-hop detour for every pair
    detour = np.min(matrix[:, :, None] + matrix[None, :, :], axis=1)
    excess = matrix - detour
    if np.any(excess > tol):
        u, w = np.unravel_index(int(np.argmax(excess)), excess.shape)
        v = int(np.argmin(matrix[u, :] + matrix[:, w]))
        errors.append(
            ValidationError(
                name,
                f"triangle inequality violated: d({u},{w})={matrix[u, w]:g} > "
                f"d({u},{v})+d({v},{w})={matrix[u, v] + matrix[v, w]:g}",
                "repair the metric with a shortest-path closure",
                entry=(int(u), int(w)),
            )
        )
    return errors


class InstanceValidator:
    """Validates instance data against the model invariants"""

    @staticmethod
    def validate_costs(inst: Instance) -> List[ValidationError]:
        errors = []
        f = inst.facility_cost
        if np.any(~np.isfinite(f)) or np.any(f < 0):
            errors.append(ValidationError("f", "opening costs must be finite and nonnegative"))
        c = inst.connection_cost
        bad = np.argwhere(np.isnan(c) | (c < 0))
        if bad.size:
            i, j = (int(v) for v in bad[0])
            errors.append(ValidationError("c", "connection costs must be nonnegative", entry=(i, j)))
        for j in range(inst.m):
            if np.all(np.isinf(c[:, j])):
                errors.append(
                    ValidationError("c", f"client {j} has no facility with finite connection cost")
                )
        if np.any(inst.client_weight < 0) or np.any(~np.isfinite(inst.client_weight)):
            errors.append(ValidationError("lambda", "client weights must be finite and nonnegative"))
        return errors

    @staticmethod
    def validate_time_metric(inst: Instance, tol: float = Tolerances.METRIC) -> List[ValidationError]:
        return _metric_errors(inst.time_metric, "d", tol)

    @staticmethod
    def validate_routes(inst: Instance) -> List[ValidationError]:
        errors = []
        if inst.route_count < 1:
            errors.append(ValidationError("k", "route count must be at least 1"))
        if not inst.route_budget > 0:
            errors.append(ValidationError("B", "route budget must be positive"))
        return errors

    @staticmethod
    def validate_uniform(inst: Instance, tol: float = Tolerances.METRIC) -> Optional[ValidationError]:
        if not inst.is_uniform:
            return None
        d = inst.time_metric
        target = 1.0 - np.eye(inst.n + 1)
        if np.any(np.abs(d - target) > tol):
            return ValidationError("tags", "uniform instance must have d(u,v) = 1 for all u != v")
        return None

    @staticmethod
    def validate_related(inst: Instance, tol: float = Tolerances.METRIC) -> List[ValidationError]:
        if not inst.is_related:
            return []
        errors = []
        scale = inst.related_scale
        if scale is None or scale < 1:
            return [ValidationError("M", "related instance needs a scale M >= 1")]
        if inst.full_metric is None:
            return [ValidationError("metric", "related instance must carry the connection metric over F, D and r")]
        n, m = inst.n, inst.m
        full = inst.full_metric
        errors.extend(_metric_errors(full, "metric", tol))
        if np.any(np.abs(full[: n + 1, : n + 1] / scale - inst.time_metric) > tol * max(1.0, scale)):
            errors.append(ValidationError("d", f"related instance must have d = c / {scale:g}"))
        block = full[:n, n + 1:]
        finite = np.isfinite(inst.connection_cost)
        if np.any(np.abs(block[finite] - inst.connection_cost[finite]) > tol) or not finite.all():
            errors.append(ValidationError("c", "connection costs disagree with the connection metric"))
        if m == 0:
            errors.append(ValidationError("m", "no clients"))
        return errors

    @staticmethod
    def validate_metric_extension(inst: Instance, tol: float = Tolerances.METRIC) -> List[ValidationError]:
        if inst.full_metric is None or inst.is_related:
            return []
        errors = _metric_errors(inst.full_metric, "metric", tol)
        block = inst.full_metric[: inst.n, inst.n + 1:]
        if np.any(np.abs(block - inst.connection_cost) > tol):
            errors.append(ValidationError("c", "connection costs disagree with the connection metric"))
        return errors

    @staticmethod
    def validate_zero_facility_costs(inst: Instance) -> Optional[ValidationError]:
        if not (inst.has_tag("zfc") or inst.is_mgl):
            return None
        if np.any(inst.facility_cost != 0):
            return ValidationError("f", "zero-facility-cost instance has positive opening costs")
        return None

    @staticmethod
    def validate_mgl(inst: Instance) -> Optional[ValidationError]:
        if not inst.is_mgl:
            return None
        c = inst.connection_cost
        if not np.all((c == 0) | np.isinf(c)):
            return ValidationError("c", "group instance must have connection costs in {0, inf}")
        return None

    @staticmethod
    def validate_all(inst: Instance) -> ValidationReport:
        """Validate everything and return the report"""
        errors: List[ValidationError] = []
        errors.extend(InstanceValidator.validate_costs(inst))
        errors.extend(InstanceValidator.validate_time_metric(inst))
        errors.extend(InstanceValidator.validate_routes(inst))
        errors.extend(InstanceValidator.validate_related(inst))
        errors.extend(InstanceValidator.validate_metric_extension(inst))
        for check in (
            InstanceValidator.validate_uniform,
            InstanceValidator.validate_zero_facility_costs,
            InstanceValidator.validate_mgl,
        ):
            error = check(inst)
            if error:
                errors.append(error)
        return ValidationReport(errors)


def validate(inst: Instance) -> ValidationReport:
    return InstanceValidator.validate_all(inst)


def format_validation_errors(errors: List[ValidationError]) -> str:
    """Format validation errors for display"""
    if not errors:
        return "Instance is valid."

    lines = ["Found the following issues:\n"]
    for i, error in enumerate(errors, 1):
        lines.append(f"{i}. {error.location.upper()}: {error.message}")
        if error.suggestion:
            lines.append(f"   Suggestion: {error.suggestion}")

    return "\n".join(lines)

