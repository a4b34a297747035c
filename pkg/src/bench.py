"""
Experiment harness: seeded batches of relax → round → evaluate with
certificate aggregation and ratio tables
"""

import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from .colgen import metric_timescale, solve_ml_lp1, solve_ml_lp2_colgen
from .config import Config, Tolerances
from .errors import ConfigError, ExactLimitError, MluflError, RoundingError
from .exact import exact_ml, exact_mlufl
from .generators import Family, GenSpec, generate
from .instance import Instance, evaluate, read_instance, write_rows
from .relaxations import MluflLpOptions, build_timescale, solve_mlufl_relaxation, solve_uniform_relaxation
from .round_general import GeneralParams, PhaseMode, round_general_lp_driver, round_general_norm_driver
from .round_ml import round_ml_lp1, round_ml_lp2
from .round_related import round_related
from .round_uniform import metric_uniform_pipeline, round_uniform_general, round_zfc
from .seeding import derive_seed, make_rng

logger = logging.getLogger(__name__)


class Algorithm(str, Enum):
    GENERAL = "general"
    RELATED = "related"
    UNIFORM_GENERAL = "uniform-general"
    ZFC = "zfc"
    METRIC_UNIFORM = "metric-uniform"
    ML_LP1 = "ml-lp1"
    ML_LP2 = "ml-lp2"


COMPATIBLE = {
    Algorithm.RELATED: {Family.RELATED},
    Algorithm.UNIFORM_GENERAL: {Family.UNIFORM, Family.METRIC_UNIFORM, Family.ZFC},
    Algorithm.ZFC: {Family.ZFC},
    Algorithm.METRIC_UNIFORM: {Family.METRIC_UNIFORM, Family.ZFC},
}


class ExperimentConfig(BaseModel):
    """One batch of trials; mirrors the CLI flags"""

    algorithm: Algorithm
    instance: Optional[GenSpec] = Field(default=None, description="Family and sizes of generated instances.")
    instance_path: Optional[str] = Field(default=None, description="Fixed instance file used by every trial.")
    seed: int = 0
    trials: int = Field(default=1, ge=0)
    epsilon: float = Field(default_factory=lambda: Config.EPSILON, gt=0, le=1)
    alpha: float = Field(default_factory=lambda: Config.ALPHA, gt=0, lt=1)
    beta: float = Field(default_factory=lambda: Config.BETA, gt=0, lt=1)
    p: float = Field(default=1.0, ge=1.0)
    k: Optional[int] = Field(default=None, ge=1)
    budget: Optional[float] = Field(default=None, gt=0)
    phase_mode: PhaseMode = PhaseMode.PLAIN
    ml_mode: Literal["random", "det"] = "random"
    retries: int = Field(default_factory=lambda: Config.RETRIES, ge=1)
    exact: bool = True
    workers: int = Field(default_factory=lambda: Config.WORKERS, ge=1)
    out: Optional[str] = None
    format: Literal["csv", "md"] = "csv"
    inject_violation: bool = Field(default=False, description="Test hook: count one violation per trial.")

    @model_validator(mode="after")
    def check_compatibility(self) -> "ExperimentConfig":
        if (self.instance is None) == (self.instance_path is None):
            raise ValueError("give exactly one of 'instance' and 'instance_path'")
        allowed = COMPATIBLE.get(self.algorithm)
        if allowed is not None and self.instance is not None and self.instance.family not in allowed:
            names = ", ".join(sorted(f.value for f in allowed))
            raise ValueError(f"algorithm {self.algorithm.value} needs a family among: {names}")
        if self.algorithm == Algorithm.ML_LP1 and self.instance is not None and self.instance.family == Family.MGL:
            raise ValueError("ml-lp1 does not handle group instances; use ml-lp2")
        return self


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError("CONFIG_READ", f"cannot read {path}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError("CONFIG_SYNTAX", f"{path}: line {e.lineno}: {e.msg}")
    if not isinstance(data, dict):
        raise ConfigError("CONFIG_INVALID", f"{path}: top level must be an object")
    return data


def build_config(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first.get("loc", ()))
        raise ConfigError("CONFIG_INVALID", f"{where or 'config'}: {first.get('msg')}", "check the config values")


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    return build_config(read_config_file(path))


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------


@dataclass
class TrialRecord:
    trial: int
    seed: int
    algorithm: str
    n: int
    m: int
    cost: float = math.nan
    lp_value: float = math.nan
    exact: Optional[float] = None
    violations: int = 0
    success: bool = True
    runtime: float = 0.0
    notes: List[str] = field(default_factory=list)

    @property
    def ratio_lp(self) -> float:
        if not math.isfinite(self.cost) or math.isnan(self.lp_value):
            return math.nan
        if self.lp_value <= Tolerances.FEASIBILITY:
            return 1.0 if self.cost <= Tolerances.FEASIBILITY else math.inf
        return self.cost / self.lp_value

    @property
    def ratio_exact(self) -> float:
        if self.exact is None or not math.isfinite(self.cost):
            return math.nan
        if self.exact <= Tolerances.FEASIBILITY:
            return 1.0 if self.cost <= Tolerances.FEASIBILITY else math.inf
        return self.cost / self.exact

    def row(self) -> List[str]:
        def fmt(value: Optional[float]) -> str:
            return "" if value is None or (isinstance(value, float) and math.isnan(value)) else f"{value:.12g}"

        return [
            str(self.trial), str(self.seed), self.algorithm, str(self.n), str(self.m), fmt(self.cost),
            fmt(self.lp_value), fmt(self.exact), fmt(self.ratio_lp), fmt(self.ratio_exact),
            str(self.violations), str(int(self.success)), "; ".join(self.notes),
        ]


TRIAL_HEADER = [
    "trial", "seed", "algorithm", "n", "m", "cost", "lp_value", "exact",
    "ratio_lp", "ratio_exact", "violations", "success", "notes",
]


def _instance_for(config: ExperimentConfig, trial: int) -> Instance:
    if config.instance_path is not None:
        return read_instance(config.instance_path)
    spec = config.instance
    updates: Dict[str, Any] = {}
    if config.k is not None:
        updates["route_count"] = config.k
    if config.budget is not None:
        updates["route_budget"] = config.budget
    if updates:
        spec = spec.model_copy(update=updates)
    return generate(spec, derive_seed(config.seed, trial))


def _exact_mlufl(inst: Instance) -> Optional[float]:
    try:
        return exact_mlufl(inst).value
    except ExactLimitError:
        return None


def _run_algorithm(config: ExperimentConfig, inst: Instance, record: TrialRecord, seed: int) -> None:
    algo = config.algorithm
    k = config.k

    if algo == Algorithm.GENERAL:
        params = GeneralParams(config.phase_mode, config.p, k, seed, config.retries)
        if config.p > 1:
            result = round_general_norm_driver(inst, config.p, config.epsilon, params)
        else:
            result = round_general_lp_driver(inst, config.epsilon, params)
        record.cost, record.lp_value = result.breakdown.total, result.lp_value
        diag = result.diagnostics
        record.violations += diag.connection_violations + (0 if diag.route_bound_ok else 1)
        record.notes.append(f"attempts={diag.attempts}")
        if config.exact and config.p == 1:
            record.exact = _exact_mlufl(inst)
        return

    if algo == Algorithm.RELATED:
        ts = build_timescale(inst, config.epsilon)
        relaxation = solve_mlufl_relaxation(inst, ts, MluflLpOptions(route_count=k))
        if relaxation.frac is None:
            raise RoundingError("LP_FAILED", f"relaxation ended with status {relaxation.solution.status.value}")
        solution, certificates = round_related(inst, relaxation.frac)
        record.cost, record.lp_value = evaluate(inst, solution).total, relaxation.value
        record.violations += len(certificates.violations)
        if config.exact:
            record.exact = _exact_mlufl(inst)
        return

    if algo in (Algorithm.UNIFORM_GENERAL, Algorithm.ZFC):
        relaxation = solve_uniform_relaxation(inst, k)
        if relaxation.frac is None:
            raise RoundingError("LP_FAILED", f"uniform LP ended with status {relaxation.solution.status.value}")
        if algo == Algorithm.UNIFORM_GENERAL:
            solution, report = round_uniform_general(inst, relaxation.frac, make_rng(seed))
            record.violations += len(report.violations)
            record.notes.append(f"K={report.K}")
        else:
            zfc = round_zfc(inst, relaxation.frac, config.alpha)
            solution = zfc.to_solution(inst.route_count)
            record.violations += len(zfc.violations)
            if zfc.latency_exceeded:
                record.notes.append("latency above monitored bound")
        record.cost, record.lp_value = evaluate(inst, solution).total, relaxation.value
        if config.exact:
            record.exact = _exact_mlufl(inst)
        return

    if algo == Algorithm.METRIC_UNIFORM:
        result = metric_uniform_pipeline(inst, config.alpha, config.beta)
        record.cost, record.lp_value = result.breakdown.total, result.lp_value
        record.violations += len(result.violations)
        if config.exact:
            record.exact = _exact_mlufl(inst)
        return

    metric, root = inst.time_metric, inst.root
    ts = metric_timescale(metric, root, config.epsilon)
    groups = inst.groups() if inst.is_mgl else None
    if algo == Algorithm.ML_LP1:
        solution, frac = solve_ml_lp1(metric, root, ts)
        if frac is None:
            raise RoundingError("LP_FAILED", f"LP1 ended with status {solution.status.value}")
        _, report = round_ml_lp1(metric, root, frac, config.ml_mode, make_rng(seed))
        record.cost, record.lp_value = report.latency, solution.objective
        record.violations += len(report.violations)
        record.notes.append(f"alpha={report.alpha:.6f}")
    else:
        result = solve_ml_lp2_colgen(metric, root, ts, groups=groups)
        _, report = round_ml_lp2(metric, root, result, make_rng(seed), groups=groups)
        record.cost, record.lp_value = report.latency, result.value
        record.success = report.success
        if not report.success:
            record.notes.append(f"uncovered={len(report.uncovered)}")
    if config.exact:
        try:
            record.exact = exact_ml(metric, root, groups)[0]
        except ExactLimitError:
            record.exact = None


def run_trial(config: ExperimentConfig, trial: int) -> TrialRecord:
    """One seeded trial; solver failures are recorded, never raised"""
    inst = _instance_for(config, trial)
    seed = derive_seed(config.seed, trial, 1)
    record = TrialRecord(trial, seed, config.algorithm.value, inst.n, inst.m)
    start = time.perf_counter()
    try:
        _run_algorithm(config, inst, record, seed)
    except MluflError as e:
        record.success = False
        record.notes.append(e.error_code)
        logger.warning("trial %d failed: %s", trial, e)
    record.runtime = time.perf_counter() - start
    if record.success and record.exact is not None and math.isfinite(record.cost):
        if record.cost < record.exact - 1e-6:
            record.violations += 1
            record.notes.append("cost below exact optimum")
    if config.inject_violation:
        record.violations += 1
    return record


def _run_trial_payload(payload: str, trial: int) -> TrialRecord:
    return run_trial(ExperimentConfig.model_validate_json(payload), trial)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class ReportBundle:
    config: ExperimentConfig
    records: List[TrialRecord]

    @property
    def violations(self) -> int:
        return sum(r.violations for r in self.records)

    @property
    def failures(self) -> int:
        return sum(1 for r in self.records if not r.success)

    @property
    def exit_code(self) -> int:
        if self.violations:
            return 1
        if self.failures:
            return 3
        return 0

    @property
    def success_rate(self) -> float:
        return 1.0 - self.failures / len(self.records) if self.records else 1.0

    def rows(self) -> List[List[str]]:
        return [TRIAL_HEADER] + [r.row() for r in self.records]

    def write(self, out: Union[str, Path]) -> Path:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"trials_{self.config.algorithm.value}.csv"
        write_rows(path, self.rows())
        return path


def run(config: ExperimentConfig) -> ReportBundle:
    """All trials of a config, in trial order whatever the worker count"""
    trials = list(range(config.trials))
    if config.workers > 1 and len(trials) > 1:
        payload = config.model_dump_json()
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(_run_trial_payload, [payload] * len(trials), trials))
    else:
        records = [run_trial(config, t) for t in trials]
    records.sort(key=lambda r: r.trial)
    bundle = ReportBundle(config, records)
    logger.info(
        "%s: %d trial(s), %d violation(s), %d failure(s)",
        config.algorithm.value, len(records), bundle.violations, bundle.failures,
    )
    if config.out:
        bundle.write(config.out)
    return bundle


def _stats(values: Sequence[float]) -> Dict[str, float]:
    finite = np.array([v for v in values if math.isfinite(v)], dtype=float)
    if finite.size == 0:
        return {"mean": math.nan, "p95": math.nan}
    return {"mean": float(finite.mean()), "p95": float(np.percentile(finite, 95))}


def table(reports: Sequence[ReportBundle], fmt: str = "md") -> str:
    """Ratio table, one row per report; runtime appears in the Markdown form only"""
    header = ["algorithm", "family", "n", "m", "trials", "mean cost/LP", "p95 cost/LP",
              "mean cost/OPT", "success rate", "violations"]
    if fmt == "md":
        header.append("mean runtime (s)")
    rows = []
    for rep in reports:
        spec = rep.config.instance
        family = spec.family.value if spec is not None else Path(rep.config.instance_path or "").name
        lp = _stats([r.ratio_lp for r in rep.records])
        opt = _stats([r.ratio_exact for r in rep.records])
        first = rep.records[0] if rep.records else None
        row = [
            rep.config.algorithm.value, family,
            str(first.n if first else (spec.n if spec else "")),
            str(first.m if first else (spec.m if spec else "")),
            str(len(rep.records)),
            _cell(lp["mean"]), _cell(lp["p95"]), _cell(opt["mean"]),
            f"{rep.success_rate:.3f}", str(rep.violations),
        ]
        if fmt == "md":
            row.append(_cell(float(np.mean([r.runtime for r in rep.records])) if rep.records else math.nan))
        rows.append(row)
    if fmt == "csv":
        return "\n".join(",".join(r) for r in [header] + rows) + "\n"
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


def _cell(value: float) -> str:
    return "-" if math.isnan(value) else f"{value:.4f}"


def dump_config(config: ExperimentConfig) -> str:
    return json.dumps(json.loads(config.model_dump_json()), indent=2, sort_keys=True)
