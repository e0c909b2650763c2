#!/usr/bin/env python3
"""
NMPC Horizon Certifier - Command Line
=====================================

Subcommands:
- run          closed-loop simulation with a CSV trace and an executive summary
- alpha-table  a priori alpha_{N,m} grid as CSV
- compare      two scenarios side by side (schedules, costs, solve times)
- min-horizon  smallest horizon reaching a target alpha
- scan         closed-loop runs over a range of horizons, violations per N as CSV

Scenario files are flat KEY=VALUE text with # comments; flags override file
values. Exit codes: 0 success, 2 "Solution may diverge" occurred, 1 error.
"""

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from dotenv import dotenv_values, load_dotenv

from alpha_table import DEFAULT_M1_MAX, SCAN_CAP, ExpoControllability, alpha_grid, min_horizon
from dynamics import DEFAULT_SUBSTEPS, ControlSystem, make_linear_scalar, make_syncgen
from errors import InputError, NmpcError, RunAbortedError, UsageError
from mpc_loop import (ALGORITHMS, STOP_TOLERANCE, ExecutionLog, certificate_holds, largest_violating_horizon,
                      performance_chain, run_algorithm, scan_horizons)
from ocp import SolverOptions, riccati_stationary
from trace_io import atomic_write_csv, write_alpha_table, write_trace

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_WARNING = 2

DEFAULT_OUTPUT_DIR = "results"
SYSTEMS = ("syncgen", "linear_scalar")
SCENARIO_KEYS = ("system", "x0", "N", "alpha_bar", "algorithm", "steps", "T", "lambda",
                 "substeps", "gtol", "max_iter", "stop_tol", "a", "b", "q", "r", "output")
DEFAULT_X0 = {"syncgen": (1.02, 0.1, 1.014), "linear_scalar": (1.0,)}


@dataclass(frozen=True)
class ScenarioConfig:
    system: str = "syncgen"
    x0: Tuple[float, ...] = DEFAULT_X0["syncgen"]
    N: int = 19
    alpha_bar: float = 0.1
    algorithm: str = "basic"
    steps: int = 100
    T: float = 0.1
    lam: float = 1e-6
    substeps: int = DEFAULT_SUBSTEPS
    gtol: float = 1e-8
    max_iter: int = 500
    stop_tol: Optional[float] = STOP_TOLERANCE
    a: float = 2.0
    b: float = 1.0
    q: float = 1.0
    r: float = 1.0
    output: Optional[str] = None

    @property
    def solver_options(self) -> SolverOptions:
        return SolverOptions(gradient_tolerance=self.gtol, max_iterations=self.max_iter)

    def output_path(self) -> Path:
        if self.output:
            return Path(self.output)
        directory = Path(os.getenv("NMPC_OUTPUT_DIR", DEFAULT_OUTPUT_DIR))
        return directory / f"{self.system}_{self.algorithm}_N{self.N}.csv"


@dataclass
class RunSummary:
    """Everything reported about a run; derived from the log alone."""
    system: str
    algorithm: str
    horizon: int
    alpha_bar: float
    schedule: List[int]
    m_values: List[int]
    alphas: List[float]
    warning_count: int
    violation_count: int
    splice_count: int
    closed_loop_cost: float
    initial_value: float
    cost_bound: float
    final_error: float
    certified_from: int
    certificate: bool
    wall_time: float
    solve_time: float
    solver_calls: int
    samples: int
    smallest_alpha: float = float("nan")
    solver_iterations: int = 0
    message: str = ""
    chain: Optional[bool] = None
    V_infinity: Optional[float] = None


# =============================================================================
# SCENARIO CONFIGURATION
# =============================================================================

def _number(key: str, raw: str, kind=float):
    try:
        value = kind(raw)
    except (TypeError, ValueError):
        raise UsageError(f"expected {kind.__name__}, got {raw!r}", field=key) from None
    if kind is float and not math.isfinite(value):
        raise UsageError(f"must be finite, got {raw!r}", field=key)
    return value


def _vector(key: str, raw: str) -> Tuple[float, ...]:
    parts = [part for part in str(raw).replace(" ", "").split(",") if part]
    if not parts:
        raise UsageError("empty vector", field=key)
    return tuple(_number(key, part) for part in parts)


def load_scenario(path) -> Dict[str, str]:
    """KEY=VALUE pairs of a scenario file (no environment interpolation)."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"scenario file not found: {path}", field="config")
    values = dotenv_values(path, interpolate=False)
    unknown = sorted(set(values) - set(SCENARIO_KEYS))
    if unknown:
        raise UsageError(f"unknown key in {path}", field=unknown[0])
    empty = [key for key, value in values.items() if value is None or value == ""]
    if empty:
        raise UsageError(f"missing value in {path}", field=empty[0])
    logger.debug(f"scenario {path}: {values}")
    return dict(values)


def build_config(values: Mapping[str, str]) -> ScenarioConfig:
    """Validated ScenarioConfig from raw string values."""
    system = values.get("system", "syncgen")
    if system not in SYSTEMS:
        raise UsageError(f"unknown system {system!r}; choose from {', '.join(SYSTEMS)}", field="system")
    config = ScenarioConfig(system=system, x0=DEFAULT_X0[system])
    updates = {}

    if "x0" in values:
        updates["x0"] = _vector("x0", values["x0"])
    for key in ("N", "steps", "substeps", "max_iter"):
        if key in values:
            updates[key] = _number(key, values[key], int)
    for key in ("alpha_bar", "T", "gtol", "a", "b", "q", "r"):
        if key in values:
            updates[key] = _number(key, values[key])
    if "lambda" in values:
        updates["lam"] = _number("lambda", values["lambda"])
    if "stop_tol" in values:
        raw = str(values["stop_tol"]).strip().lower()
        updates["stop_tol"] = None if raw in ("none", "off") else _number("stop_tol", raw)
    if "algorithm" in values:
        updates["algorithm"] = values["algorithm"]
    if "output" in values:
        updates["output"] = values["output"]

    config = replace(config, **updates)
    validate_config(config)
    return config


def validate_config(config: ScenarioConfig):
    expected_dim = len(DEFAULT_X0[config.system])
    if len(config.x0) != expected_dim:
        raise UsageError(f"{config.system} needs {expected_dim} coordinates, got {len(config.x0)}", field="x0")
    if not all(math.isfinite(v) for v in config.x0):
        raise UsageError("coordinates must be finite", field="x0")
    if config.N < 2:
        raise UsageError(f"must be at least 2, got {config.N}", field="N")
    if not 0 < config.alpha_bar < 1:
        raise UsageError(f"must lie in (0, 1), got {config.alpha_bar}", field="alpha_bar")
    if config.algorithm not in ALGORITHMS:
        raise UsageError(f"unknown algorithm {config.algorithm!r}; choose from {', '.join(ALGORITHMS)}",
                         field="algorithm")
    if config.steps < 1:
        raise UsageError(f"must be at least 1, got {config.steps}", field="steps")
    if not config.T > 0:
        raise UsageError(f"must be positive, got {config.T}", field="T")
    if config.lam < 0:
        raise UsageError(f"must be nonnegative, got {config.lam}", field="lambda")
    if config.substeps < 1:
        raise UsageError(f"must be at least 1, got {config.substeps}", field="substeps")
    if not config.gtol > 0:
        raise UsageError(f"must be positive, got {config.gtol}", field="gtol")
    if config.max_iter < 0:
        raise UsageError(f"must be nonnegative, got {config.max_iter}", field="max_iter")
    if config.stop_tol is not None and config.stop_tol < 0:
        raise UsageError(f"must be nonnegative, got {config.stop_tol}", field="stop_tol")
    if config.system == "linear_scalar":
        if config.b == 0:
            raise UsageError("b = 0 makes the system uncontrollable", field="b")
        for key in ("q", "r"):
            if not getattr(config, key) > 0:
                raise UsageError(f"must be positive, got {getattr(config, key)}", field=key)


def build_system(config: ScenarioConfig) -> ControlSystem:
    if config.system == "syncgen":
        return make_syncgen(sampling_period=config.T, cost_weight=config.lam, substeps=config.substeps)
    return make_linear_scalar(config.a, config.b, config.q, config.r)


def resolve_config(config_path: Optional[str], overrides: Mapping[str, Optional[str]]) -> ScenarioConfig:
    values = load_scenario(config_path) if config_path else {}
    values.update({key: value for key, value in overrides.items() if value is not None})
    return build_config(values)


# =============================================================================
# SUMMARIES
# =============================================================================

def summarize(log: ExecutionLog, sys: ControlSystem) -> RunSummary:
    final_state = log.final_state if log.final_state is not None else log.initial_state
    V_infinity = None
    chain = None
    if sys.name == "linear_scalar" and log.events:
        p = sys.parameters
        V_infinity = riccati_stationary(p["a"], p["b"], p["q"], p["r"]) * float(log.initial_state[0]) ** 2
        chain = performance_chain(log, V_infinity)

    return RunSummary(
        system=log.system,
        algorithm=log.algorithm,
        horizon=log.horizon,
        alpha_bar=log.alpha_bar,
        schedule=list(log.schedule.events),
        m_values=[event.m for event in log.events],
        alphas=[event.alpha for event in log.events],
        warning_count=log.warning_count,
        violation_count=log.violation_count,
        splice_count=log.splice_count,
        closed_loop_cost=log.closed_loop_cost,
        initial_value=log.initial_value,
        cost_bound=log.initial_value / log.alpha_bar,
        final_error=float(np.max(np.abs(final_state - sys.equilibrium_state))),
        certified_from=log.certified_from,
        certificate=certificate_holds(log),
        wall_time=log.wall_time,
        solve_time=log.solve_time,
        solver_calls=log.solver_calls,
        samples=len(log.samples),
        smallest_alpha=log.smallest_alpha,
        solver_iterations=log.solver_iterations,
        message=log.message,
        chain=chain,
        V_infinity=V_infinity,
    )


def print_run_summary(summary: RunSummary, trace_path: Optional[Path] = None):
    print(f"\n🎯 NMPC RUN - EXECUTIVE SUMMARY")
    print(f"=" * 60)
    print(f"System: {summary.system} | Algorithm: {summary.algorithm} | N={summary.horizon} | alpha_bar={summary.alpha_bar}")
    print(f"Samples: {summary.samples} | Events: {len(summary.m_values)} | Stop: {summary.message}")
    print()

    print(f"📊 CERTIFICATION")
    print(f"  Schedule S: {summary.schedule[:25]}{' ...' if len(summary.schedule) > 25 else ''}")
    print(f"  m_n used: {sorted(set(summary.m_values))}")
    if math.isfinite(summary.smallest_alpha):
        print(f"  Smallest local alpha: {summary.smallest_alpha:.6f} (alpha_bar {summary.alpha_bar})")
    print(f"  'Solution may diverge' warnings: {summary.warning_count}")
    print(f"  Relaxed Lyapunov violations (monitoring): {summary.violation_count}")
    print(f"  Splices applied: {summary.splice_count}")
    print()

    print(f"📈 PERFORMANCE")
    print(f"  Closed-loop cost: {summary.closed_loop_cost:.10e}")
    print(f"  V_N(x0): {summary.initial_value:.10e}")
    print(f"  Certified bound V_N(x0)/alpha_bar: {summary.cost_bound:.10e}")
    print(f"  Final error |x - x*|_inf: {summary.final_error:.3e}")
    if summary.warning_count == 0 and summary.violation_count == 0:
        mark = "✅" if summary.certificate else "❌"
        print(f"  {mark} Telescoping certificate: {'holds' if summary.certificate else 'FAILS'}")
    elif summary.warning_count:
        print(f"  ⚠️ Performance certified from event {summary.certified_from} on")
    if summary.chain is not None:
        mark = "✅" if summary.chain else "❌"
        print(f"  {mark} alpha V_inf <= alpha J <= V_N(x0) <= V_inf with V_inf={summary.V_infinity:.10e}")
    print()

    print(f"⏱️ EFFORT")
    print(f"  Solver calls: {summary.solver_calls} | BFGS iterations: {summary.solver_iterations}")
    print(f"  Solve time: {summary.solve_time:.3f}s | Wall time: {summary.wall_time:.3f}s")
    if trace_path is not None:
        print(f"\n📄 Trace written to {trace_path}")


# =============================================================================
# COMMANDS
# =============================================================================

def execute(config: ScenarioConfig) -> Tuple[ExecutionLog, ControlSystem]:
    sys_model = build_system(config)
    log = run_algorithm(config.algorithm, sys_model, np.array(config.x0), config.N, config.alpha_bar,
                        steps=config.steps, stop_tol=config.stop_tol, options=config.solver_options)
    return log, sys_model


def execute_keeping_partial(config: ScenarioConfig) -> Tuple[ExecutionLog, ControlSystem]:
    """execute(), writing the partial trace of an aborted run before re-raising."""
    try:
        return execute(config)
    except RunAbortedError as e:
        if e.log is not None:
            path = config.output_path()
            write_trace(e.log, path)
            print(f"📄 Partial trace written to {path}")
        raise


def cmd_run(config: ScenarioConfig) -> int:
    path = config.output_path()
    try:
        log, sys_model = execute_keeping_partial(config)
    except RunAbortedError as e:
        print(f"❌ Error: {e}")
        return EXIT_ERROR

    write_trace(log, path)
    summary = summarize(log, sys_model)
    print_run_summary(summary, path)
    if summary.warning_count:
        print(f"\n⚠️ Solution may diverge at {summary.warning_count} event(s)")
        return EXIT_WARNING
    print(f"\n✅ Run complete")
    return EXIT_OK


def cmd_alpha_table(C: float, sigma: float, N_max: int, out: Optional[str] = None,
                    m1_max: Optional[int] = None) -> int:
    ec = _controllability(C, sigma)
    if N_max < 2:
        raise UsageError(f"must be at least 2, got {N_max}", field="N_max")
    table = alpha_grid(ec, N_max, m1_max)
    if out:
        path = Path(out)
    else:
        path = Path(os.getenv("NMPC_OUTPUT_DIR", DEFAULT_OUTPUT_DIR)) / f"alpha_C{C:g}_sigma{sigma:g}.csv"
    write_alpha_table(table, path)

    last = table[table["N"] == N_max]
    top = last.loc[last["alpha"].idxmax()]
    print(f"\n📊 ALPHA TABLE (C={C:g}, sigma={sigma:g})")
    print(f"  Rows: {len(table)}")
    print(f"  Best at N={N_max}: m={int(top['m'])}, alpha={top['alpha']:.6f}")
    print(f"📄 Table written to {path}")
    return EXIT_OK


def cmd_min_horizon(C: float, sigma: float, alpha_bar: float, m_policy: str, cap: int = SCAN_CAP) -> int:
    ec = _controllability(C, sigma)
    if not 0 < alpha_bar < 1:
        raise UsageError(f"must lie in (0, 1), got {alpha_bar}", field="alpha_bar")
    policy = m_policy if m_policy == "best" else _number("m", m_policy, int)
    if policy != "best" and policy < 1:
        raise UsageError(f"must be at least 1 or 'best', got {m_policy}", field="m")
    N = min_horizon(alpha_bar, policy, ec, cap=cap)
    print(f"✅ Smallest horizon with alpha >= {alpha_bar} (m policy {m_policy}): N = {N}")
    return EXIT_OK


def cmd_compare(config_a: ScenarioConfig, config_b: ScenarioConfig,
                parallel: bool = False, out: Optional[str] = None) -> int:
    if config_a.system != config_b.system or not np.array_equal(config_a.x0, config_b.x0):
        raise UsageError(f"scenarios differ in system or x0: {config_a.system}{config_a.x0} "
                         f"vs {config_b.system}{config_b.x0}", field="system")

    try:
        if parallel:
            with ThreadPoolExecutor(max_workers=2) as pool:
                futures = [pool.submit(execute_keeping_partial, config) for config in (config_a, config_b)]
                (log_a, sys_a), (log_b, sys_b) = [future.result() for future in futures]
        else:
            log_a, sys_a = execute_keeping_partial(config_a)
            log_b, sys_b = execute_keeping_partial(config_b)
    except RunAbortedError as e:
        print(f"❌ Error: {e}")
        return EXIT_ERROR

    a, b = summarize(log_a, sys_a), summarize(log_b, sys_b)
    cost_ratio = b.closed_loop_cost / a.closed_loop_cost if a.closed_loop_cost > 0 else float("nan")
    time_ratio = b.solve_time / a.solve_time if a.solve_time > 0 else float("nan")
    refines = set(a.schedule) <= set(b.schedule)

    print(f"\n🎯 NMPC COMPARISON")
    print(f"=" * 60)
    for label, s in (("A", a), ("B", b)):
        print(f"{label}: {s.algorithm} N={s.horizon} | cost {s.closed_loop_cost:.10e} | "
              f"warnings {s.warning_count} | violations {s.violation_count} | splices {s.splice_count} | "
              f"solve {s.solve_time:.3f}s | calls {s.solver_calls}")
        print(f"   S = {s.schedule[:25]}{' ...' if len(s.schedule) > 25 else ''}")
    print(f"📈 Cost ratio B/A: {cost_ratio:.6f}")
    print(f"⏱️ Solve time ratio B/A: {time_ratio:.3f}")
    print(f"🔁 Schedule B refines A: {'yes' if refines else 'no'}")

    report = pd.DataFrame([
        {"label": label, "algorithm": s.algorithm, "N": s.horizon, "alpha_bar": s.alpha_bar,
         "closed_loop_cost": s.closed_loop_cost, "warnings": s.warning_count,
         "violations": s.violation_count, "smallest_alpha": s.smallest_alpha, "splices": s.splice_count,
         "solver_calls": s.solver_calls, "solver_iterations": s.solver_iterations,
         "solve_time": s.solve_time, "wall_time": s.wall_time,
         "schedule": " ".join(str(k) for k in s.schedule)}
        for label, s in (("A", a), ("B", b))
    ])
    path = Path(out) if out else Path(os.getenv("NMPC_OUTPUT_DIR", DEFAULT_OUTPUT_DIR)) / "compare.csv"
    atomic_write_csv(report, path)
    print(f"📄 Report written to {path}")
    return EXIT_WARNING if (a.warning_count or b.warning_count) else EXIT_OK


def cmd_scan(config: ScenarioConfig, N_min: int, N_max: Optional[int] = None,
             first_only: bool = False, out: Optional[str] = None) -> int:
    N_max = config.N if N_max is None else N_max
    if N_min < 2:
        raise UsageError(f"must be at least 2, got {N_min}", field="N_min")
    if N_max < N_min:
        raise UsageError(f"must be at least N_min={N_min}, got {N_max}", field="N_max")

    sys_model = build_system(config)
    rows = scan_horizons(sys_model, np.array(config.x0), range(N_max, N_min - 1, -1), config.alpha_bar,
                         algorithm=config.algorithm, steps=config.steps, stop_tol=config.stop_tol,
                         options=config.solver_options, stop_at_first_violation=first_only)
    largest = largest_violating_horizon(rows)

    print(f"\n📏 HORIZON SCAN ({config.system}, {config.algorithm}, alpha_bar={config.alpha_bar})")
    print(f"=" * 60)
    for row in rows:
        print(f"  N={row.N:3d} | violations {row.violations:3d} | warnings {row.warnings:3d} | "
              f"min alpha {row.smallest_alpha:.6f} | samples {row.samples} | {row.message}")
    if largest is None:
        print(f"✅ No violation for N in [{rows[-1].N}, {rows[0].N}]")
    else:
        print(f"⚠️ Largest horizon with a violation: N = {largest}")

    report = pd.DataFrame([asdict(row) for row in rows])
    if out:
        path = Path(out)
    else:
        path = Path(os.getenv("NMPC_OUTPUT_DIR", DEFAULT_OUTPUT_DIR)) / f"scan_{config.system}_{config.algorithm}.csv"
    atomic_write_csv(report, path)
    print(f"📄 Scan written to {path}")
    return EXIT_OK


def _controllability(C: float, sigma: float) -> ExpoControllability:
    try:
        return ExpoControllability(C, sigma)
    except InputError as e:
        raise UsageError(str(e), field="C" if "C must" in str(e) else "sigma") from e


# =============================================================================
# ARGUMENT PARSING
# =============================================================================

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, field="arguments")


def _add_scenario_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="scenario file (KEY=VALUE lines, # comments)")
    p.add_argument("--system", choices=SYSTEMS)
    p.add_argument("--x0", help="initial state, comma separated")
    p.add_argument("--N", help="prediction horizon (>= 2)")
    p.add_argument("--alpha-bar", dest="alpha_bar", help="required suboptimality degree in (0, 1)")
    p.add_argument("--algorithm", help=f"one of {', '.join(ALGORITHMS)}")
    p.add_argument("--steps", help="sampling instants to simulate")
    p.add_argument("--T", help="sampling period (syncgen)")
    p.add_argument("--lambda", dest="lambda", help="control weight in the stage cost (syncgen)")
    p.add_argument("--substeps", help="RK4 substeps per sampling period")
    p.add_argument("--gtol", help="solver gradient tolerance")
    p.add_argument("--max-iter", dest="max_iter", help="solver iteration cap")
    p.add_argument("--stop-tol", dest="stop_tol", help="stop when |x - x*|_inf <= value ('none' disables)")
    for name in ("a", "b", "q", "r"):
        p.add_argument(f"--{name}", help=f"linear_scalar coefficient {name}")
    p.add_argument("--output", help="trace CSV path")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nmpc", description="Plain NMPC with runtime suboptimality certification")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    verbosity.add_argument("--quiet", "-q", action="store_true", help="warnings and errors only")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="simulate the closed loop and write a CSV trace")
    _add_scenario_flags(run)

    table = commands.add_parser("alpha-table", help="write the alpha_{N,m} grid")
    table.add_argument("--C", type=float, default=4.0)
    table.add_argument("--sigma", type=float, default=0.6)
    table.add_argument("--N-max", dest="N_max", type=int, default=30)
    table.add_argument("--m1-max", dest="m1_max", type=int, default=DEFAULT_M1_MAX)
    table.add_argument("--output")

    compare = commands.add_parser("compare", help="run two scenarios and compare them")
    compare.add_argument("config_a")
    compare.add_argument("config_b")
    compare.add_argument("--steps", help="override steps for both scenarios")
    compare.add_argument("--parallel", action="store_true", help="run both scenarios concurrently")
    compare.add_argument("--output", help="comparison CSV path")

    horizon = commands.add_parser("min-horizon", help="smallest horizon reaching alpha_bar")
    horizon.add_argument("--C", type=float, default=4.0)
    horizon.add_argument("--sigma", type=float, default=0.6)
    horizon.add_argument("--alpha-bar", dest="alpha_bar", type=float, required=True)
    horizon.add_argument("--m", default="best", help="fixed m or 'best' (floor(N/2))")
    horizon.add_argument("--cap", type=int, default=SCAN_CAP)

    scan = commands.add_parser("scan", help="closed-loop runs for N_max down to N_min")
    _add_scenario_flags(scan)
    scan.add_argument("--N-min", dest="N_min", type=int, default=2)
    scan.add_argument("--N-max", dest="N_max", type=int, help="largest horizon (default: the scenario N)")
    scan.add_argument("--first-only", dest="first_only", action="store_true",
                      help="stop at the first (largest) horizon with a violation")
    return parser


def dispatch(args: argparse.Namespace) -> int:
    if args.command == "run":
        overrides = {key: getattr(args, key, None) for key in SCENARIO_KEYS}
        return cmd_run(resolve_config(args.config, overrides))
    if args.command == "alpha-table":
        return cmd_alpha_table(args.C, args.sigma, args.N_max, args.output, args.m1_max)
    if args.command == "compare":
        overrides = {"steps": args.steps}
        config_a = resolve_config(args.config_a, overrides)
        config_b = resolve_config(args.config_b, overrides)
        return cmd_compare(config_a, config_b, parallel=args.parallel, out=args.output)
    if args.command == "scan":
        overrides = {key: getattr(args, key, None) for key in SCENARIO_KEYS}
        config = resolve_config(args.config, overrides)
        return cmd_scan(config, args.N_min, args.N_max, args.first_only, config.output)
    return cmd_min_horizon(args.C, args.sigma, args.alpha_bar, args.m, args.cap)


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"❌ Usage error: {e}", file=sys.stderr)
        return EXIT_ERROR

    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s - %(levelname)s - %(message)s')

    try:
        return dispatch(args)
    except UsageError as e:
        print(f"❌ Usage error: {e}", file=sys.stderr)
        return EXIT_ERROR
    except NmpcError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"❌ Error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
