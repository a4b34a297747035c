"""
MLUFL Solver Toolkit - Main Entry Point

CLI interface: relax, round, exact baselines, benchmark batches
"""

import argparse
import sys
from typing import Any, Dict, List, Optional

from colorama import Fore, Style, init

from .bench import Algorithm, ReportBundle, build_config, read_config_file, run, run_trial, table
from .colgen import metric_timescale, solve_ml_lp1, solve_ml_lp2_colgen
from .config import Config
from .errors import ConfigError, ExactLimitError, InstanceError, MluflError
from .exact import exact_ml, exact_mlufl
from .generators import Family, GenSpec, generate
from .instance import Instance, read_instance, write_instance
from .logging_setup import configure_logging
from .lpcore import LpStatus
from .relaxations import (
    MluflLpOptions,
    build_timescale,
    solve_lp_norm_relaxation,
    solve_mlufl_relaxation,
    solve_uniform_relaxation,
)
from .validators import format_validation_errors, validate

# Initialize colorama for colored terminal output
init(autoreset=True)

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2
EXIT_FAILURE = 3


def print_header(title: str = "MLUFL Solver Toolkit"):
    """Print application header"""
    print("\n" + "=" * 60)
    print(Fore.CYAN + Style.BRIGHT + title)
    print(Fore.CYAN + "Minimum-latency facility location")
    print("=" * 60 + "\n")


def print_error(message: str):
    """Print error message"""
    print(Fore.RED + "❌ " + message)


def print_success(message: str):
    """Print success message"""
    print(Fore.GREEN + "✅ " + message)


def print_info(message: str):
    """Print info message"""
    print(Fore.BLUE + "ℹ️  " + message)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlufl", description="MLUFL relaxations, roundings and baselines")
    parser.add_argument("--log-level", default=None, help="Override MLUFL_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, instance_required: bool = True) -> None:
        p.add_argument("--instance", required=instance_required, help="Instance JSON file")
        p.add_argument("--algo", choices=[a.value for a in Algorithm], default=None)
        p.add_argument("--eps", type=float, default=None, help="Grid parameter epsilon")
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--beta", type=float, default=None)
        p.add_argument("--p", type=float, default=None, help="Latency norm / power")
        p.add_argument("--k", type=int, default=None, help="Route count")
        p.add_argument("--budget", type=float, default=None, help="Route budget B")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="Output directory")
        p.add_argument("--format", choices=["csv", "md"], default=None)

    common(sub.add_parser("solve", help="Solve the relaxation only"))
    common(sub.add_parser("round", help="Relax, round and evaluate one instance"))

    exact = sub.add_parser("exact", help="Exact optimum on a small instance")
    exact.add_argument("--instance", required=True)
    exact.add_argument("--ml", action="store_true", help="Minimum latency over the time metric instead")

    bench = sub.add_parser("bench", help="Run a seeded batch of trials")
    common(bench, instance_required=False)
    bench.add_argument("--config", default=None, help="Experiment config JSON; flags override its values")
    bench.add_argument("--trials", type=int, default=None)
    bench.add_argument("--family", choices=[f.value for f in Family], default=None)
    bench.add_argument("--n", type=int, default=None)
    bench.add_argument("--m", type=int, default=None)
    bench.add_argument("--workers", type=int, default=None)

    val = sub.add_parser("validate", help="Check an instance file")
    val.add_argument("--instance", required=True)

    gen = sub.add_parser("generate", help="Write a generated instance file")
    gen.add_argument("--family", choices=[f.value for f in Family], required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--k", type=int, default=None)
    gen.add_argument("--budget", type=float, default=None)
    gen.add_argument("--related-scale", type=float, default=None)
    gen.add_argument("--integral", action="store_true")
    gen.add_argument("--out", default=None, help="Instance file to write (default under MLUFL_OUTPUT_DIR)")
    return parser


def _experiment_data(args: argparse.Namespace, base: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Config dict with CLI flags layered over ``base``"""
    data: Dict[str, Any] = dict(base or {})
    flags = {
        "algorithm": getattr(args, "algo", None),
        "epsilon": args.eps,
        "alpha": args.alpha,
        "beta": args.beta,
        "p": args.p,
        "k": args.k,
        "budget": args.budget,
        "seed": args.seed,
        "out": args.out,
        "format": args.format,
        "trials": getattr(args, "trials", None),
        "workers": getattr(args, "workers", None),
    }
    data.update({k: v for k, v in flags.items() if v is not None})
    data.setdefault("algorithm", Algorithm.GENERAL.value)
    if args.instance:
        data.pop("instance", None)
        data["instance_path"] = args.instance
    spec_flags = {k: getattr(args, k, None) for k in ("family", "n", "m")}
    if any(v is not None for v in spec_flags.values()):
        spec = dict(data.get("instance") or {})
        spec.update({k: v for k, v in spec_flags.items() if v is not None})
        data["instance"] = spec
        data.pop("instance_path", None)
    return data


def cmd_solve(args: argparse.Namespace) -> int:
    inst = read_instance(args.instance)
    algo = Algorithm(args.algo or Algorithm.GENERAL.value)
    eps = args.eps
    if algo in (Algorithm.UNIFORM_GENERAL, Algorithm.ZFC, Algorithm.METRIC_UNIFORM):
        relaxation = solve_uniform_relaxation(inst, args.k)
        status, value = relaxation.solution.status, relaxation.value
    elif algo in (Algorithm.ML_LP1, Algorithm.ML_LP2):
        ts = metric_timescale(inst.time_metric, inst.root, eps)
        if algo == Algorithm.ML_LP1:
            solution, _ = solve_ml_lp1(inst.time_metric, inst.root, ts, args.k or 1)
            status, value = solution.status, solution.objective
        else:
            groups = inst.groups() if inst.is_mgl else None
            result = solve_ml_lp2_colgen(inst.time_metric, inst.root, ts, a=args.k or 1, groups=groups)
            status, value = result.status, result.value
            print_info(f"Columns: {len(result.columns)}, lower bound {result.lower_bound:.6g}")
    elif args.p is not None and args.p > 1:
        norm = solve_lp_norm_relaxation(inst, build_timescale(inst, eps), args.p)
        status, value = norm.relaxation.solution.status, norm.value
    else:
        relaxation = solve_mlufl_relaxation(inst, build_timescale(inst, eps), MluflLpOptions(route_count=args.k))
        status, value = relaxation.solution.status, relaxation.value
    print_info(f"Status: {status.value}")
    if status not in (LpStatus.OPTIMAL, LpStatus.PARTIAL):
        print_error("Relaxation did not reach an optimum")
        return EXIT_FAILURE
    print_success(f"LP value: {value:.9g}")
    return EXIT_OK


def cmd_round(args: argparse.Namespace) -> int:
    data = _experiment_data(args)
    data["trials"] = 1
    config = build_config(data)
    record = run_trial(config, 0)
    print_info(f"Instance: n={record.n}, m={record.m}, algorithm {record.algorithm}")
    if not record.success:
        print_error(f"Rounding failed: {'; '.join(record.notes)}")
        return EXIT_FAILURE
    print_success(f"Cost: {record.cost:.9g}  LP: {record.lp_value:.9g}  ratio: {record.ratio_lp:.4f}")
    if record.exact is not None:
        print_info(f"Exact optimum: {record.exact:.9g}")
    if config.out:
        path = ReportBundle(config, [record]).write(config.out)
        print_info(f"Trial record written to {path}")
    if record.violations:
        print_error(f"{record.violations} certificate violation(s)")
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_exact(args: argparse.Namespace) -> int:
    inst = read_instance(args.instance)
    if args.ml:
        groups = inst.groups() if inst.is_mgl else None
        value, order = exact_ml(inst.time_metric, inst.root, groups)
        print_success(f"Minimum latency: {value:.9g}")
        print_info(f"Order: {order}")
        return EXIT_OK
    result = exact_mlufl(inst)
    print_success(f"Optimum: {result.value:.9g}")
    if result.solution is not None:
        print_info(f"Routes: {result.solution.routes}")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    base = read_config_file(args.config) if args.config else None
    config = build_config(_experiment_data(args, base))
    print_info(f"Running {config.trials} trial(s) of {config.algorithm.value}")
    bundle = run(config)
    print(table([bundle], config.format))
    if config.out:
        print_info(f"Trial records written under {config.out}")
    if bundle.exit_code == EXIT_VIOLATION:
        print_error(f"{bundle.violations} certificate violation(s)")
    elif bundle.exit_code == EXIT_FAILURE:
        print_error(f"{bundle.failures} trial(s) failed")
    else:
        print_success("All trials passed their certificates")
    return bundle.exit_code


def cmd_validate(args: argparse.Namespace) -> int:
    inst: Instance = read_instance(args.instance)
    report = validate(inst)
    if report.valid:
        print_success(f"{args.instance} is a valid instance (n={inst.n}, m={inst.m})")
        return EXIT_OK
    print_error("Instance errors:")
    print(format_validation_errors(report.errors))
    return EXIT_USAGE


def cmd_generate(args: argparse.Namespace) -> int:
    fields: Dict[str, Any] = {"family": args.family, "n": args.n, "m": args.m, "integral": args.integral}
    if args.k is not None:
        fields["route_count"] = args.k
    if args.budget is not None:
        fields["route_budget"] = args.budget
    if args.related_scale is not None:
        fields["related_scale"] = args.related_scale
    try:
        spec = GenSpec(**fields)
    except ValueError as e:
        raise ConfigError("BAD_SPEC", str(e))
    inst = generate(spec, args.seed)
    out = args.out or str(Config.OUTPUT_DIR / f"{args.family}_n{args.n}_m{args.m}_s{args.seed}.json")
    write_instance(inst, out)
    print_success(f"Wrote {args.family} instance (n={inst.n}, m={inst.m}) to {out}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "round": cmd_round,
    "exact": cmd_exact,
    "bench": cmd_bench,
    "validate": cmd_validate,
    "generate": cmd_generate,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main application entry point"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    configure_logging(args.log_level)
    print_header()
    if Config.DEBUG:
        Config.print_config()

    errors = Config.validate()
    if errors:
        print_error("Configuration errors:")
        for error in errors:
            print(f"  • {error}")
        print_info("Please update your .env file")
        return EXIT_USAGE

    try:
        return COMMANDS[args.command](args)
    except (ConfigError, InstanceError, ExactLimitError) as e:
        print_error(str(e))
        return EXIT_USAGE
    except MluflError as e:
        print_error(str(e))
        if e.suggestion:
            print_info(f"Suggestion: {e.suggestion}")
        return EXIT_FAILURE
    except Exception as e:
        print_error(f"An error occurred: {str(e)}")
        if Config.DEBUG:
            import traceback
            traceback.print_exc()
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
