#!/usr/bin/env python3
"""
Certified Receding-Horizon Loop
===============================

Drives the closed loop and records a certification log:
- classical: one control per event, relaxed Lyapunov inequality monitored only
- basic: smallest m_n whose m-step inequality holds, "Solution may diverge"
  fallback to m_n = 1 when none does
- update_a: basic plus early re-closing via the update condition anchored at V_N(x_n)
- update_b: basic plus early re-closing via the endpoint-anchored condition,
  re-anchored after every accepted update

Every value V_N(x_{n+1}) used to certify an event is the solution the next
event starts from, so the certificates telescope exactly.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from dynamics import ControlSystem, as_state
from errors import ConsistencyError, DivergenceError, InputError, RunAbortedError
from ocp import (OcpSolution, SolverOptions, evaluate_controls, shift_inverse_hessian, shift_warm_start,
                 solve)
from suboptimality import (VALUE_SLACK, check_mstep, check_update_A, check_update_B,
                           splice)

logger = logging.getLogger(__name__)

DEFAULT_STEPS = 100
STOP_TOLERANCE = 1e-4
ALGORITHMS = ("classical", "basic", "update_a", "update_b")

WARNING_NONE = 0
WARNING_DIVERGE = 1
WARNING_VIOLATION = 2

DIVERGE_MESSAGE = "Solution may diverge"
PROLONGATION_HINT = ("alpha_bar not reached for any j <= N-1; a longer prediction horizon "
                     "would restore the local inequality (not attempted, m_n = 1 applied)")


@dataclass
class UpdateSchedule:
    """Ascending instants s(0)=0 < s(1) < ... at which the control was recomputed."""
    events: List[int] = field(default_factory=lambda: [0])

    def back(self) -> int:
        return self.events[-1]

    def append(self, instant: int):
        if instant <= self.back():
            raise ConsistencyError(f"schedule must ascend: {instant} after {self.back()}")
        self.events.append(instant)

    @property
    def gaps(self) -> List[int]:
        return [b - a for a, b in zip(self.events, self.events[1:])]

    def validate(self, N: int):
        if not self.events or self.events[0] != 0:
            raise ConsistencyError("schedule must start at 0")
        for gap in self.gaps:
            if not 1 <= gap <= N - 1:
                raise ConsistencyError(f"schedule gap {gap} outside [1, {N - 1}]")


@dataclass
class UpdateOutcome:
    j: int
    condition: str
    satisfied: bool
    splice_applied: bool
    controls_changed: bool
    lhs: float
    rhs: float
    alpha_local: float


@dataclass
class EventRecord:
    index: int
    start: int
    m: int
    alphas: List[float]
    warning: bool
    violation: bool
    updates: List[UpdateOutcome]
    value_before: float
    value_after: float
    event_cost: float
    accumulated_cost: float
    unconverged_solves: int = 0
    suggestion: str = ""

    @property
    def certified(self) -> bool:
        return not (self.warning or self.violation)

    @property
    def alpha(self) -> float:
        return self.alphas[-1] if self.alphas else float("nan")

    @property
    def smallest_alpha(self) -> float:
        """Smallest local alpha over the instants checked at this event."""
        finite = [a for a in self.alphas if math.isfinite(a)]
        return min(finite) if finite else float("nan")


@dataclass
class SampleRecord:
    step: int
    time: float
    state: np.ndarray
    control: np.ndarray
    stage_cost: float
    event: int
    m: int
    alpha_local: float = float("nan")
    warning: int = WARNING_NONE
    update_j: Optional[int] = None


@dataclass
class ExecutionLog:
    system: str
    algorithm: str
    horizon: int
    alpha_bar: float
    sampling_period: float
    initial_state: np.ndarray
    final_state: Optional[np.ndarray] = None
    samples: List[SampleRecord] = field(default_factory=list)
    events: List[EventRecord] = field(default_factory=list)
    schedule: UpdateSchedule = field(default_factory=UpdateSchedule)
    solver_calls: int = 0
    solver_iterations: int = 0
    solve_time: float = 0.0
    wall_time: float = 0.0
    aborted: bool = False
    message: str = ""

    @property
    def closed_loop_cost(self) -> float:
        return math.fsum(sample.stage_cost for sample in self.samples)

    @property
    def warning_count(self) -> int:
        return sum(1 for event in self.events if event.warning)

    @property
    def violation_count(self) -> int:
        return sum(1 for event in self.events if event.violation)

    @property
    def initial_value(self) -> float:
        return self.events[0].value_before if self.events else 0.0

    @property
    def final_value(self) -> float:
        return self.events[-1].value_after if self.events else 0.0

    @property
    def certified_from(self) -> int:
        """First event index after the last "Solution may diverge" warning."""
        last = max((event.index for event in self.events if event.warning), default=-1)
        return last + 1

    @property
    def splice_count(self) -> int:
        return sum(1 for event in self.events for update in event.updates if update.splice_applied)

    @property
    def smallest_alpha(self) -> float:
        values = [event.smallest_alpha for event in self.events if math.isfinite(event.smallest_alpha)]
        return min(values) if values else float("nan")


@dataclass
class _EventPlan:
    applied: OcpSolution
    m: int
    end: OcpSolution
    alphas: List[float]
    warning: bool = False
    violation: bool = False
    updates: List[UpdateOutcome] = field(default_factory=list)


class ClosedLoopRunner:
    """Runs one algorithm from one initial state; strictly sequential."""

    def __init__(self, sys: ControlSystem, N: int, alpha_bar: float,
                 options: Optional[SolverOptions] = None,
                 stop_tol: Optional[float] = STOP_TOLERANCE):
        if N < 2:
            raise InputError(f"horizon N must be at least 2, got {N}")
        if not 0 < alpha_bar < 1:
            raise InputError(f"alpha_bar must lie in (0, 1), got {alpha_bar}")
        if stop_tol is not None and stop_tol < 0:
            raise InputError(f"stop tolerance must be nonnegative, got {stop_tol}")
        self.sys = sys
        self.N = N
        self.alpha_bar = alpha_bar
        self.options = options or SolverOptions()
        self.stop_tol = stop_tol
        self._log: Optional[ExecutionLog] = None
        self._unconverged = 0

    def run(self, algorithm: str, x0, steps: int = DEFAULT_STEPS) -> ExecutionLog:
        if algorithm not in ALGORITHMS:
            raise InputError(f"unknown algorithm {algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        if steps < 1:
            raise InputError(f"steps must be at least 1, got {steps}")
        x = as_state(self.sys, x0)

        log = ExecutionLog(
            system=self.sys.name,
            algorithm=algorithm,
            horizon=self.N,
            alpha_bar=self.alpha_bar,
            sampling_period=self.sys.sampling_period,
            initial_state=x.copy(),
            final_state=x.copy(),
        )
        self._log = log
        started = time.perf_counter()
        logger.info(f"🚀 {algorithm} on {self.sys.name}: N={self.N}, alpha_bar={self.alpha_bar}, steps={steps}")

        try:
            solution = self._solve(x, None)
            while len(log.samples) < steps and not self._at_equilibrium(x):
                self._unconverged = 0
                if algorithm == "classical":
                    plan = self._classical_event(solution)
                else:
                    plan = self._certified_event(solution, algorithm)
                self._record(log, solution, plan)
                solution = plan.end
                x = plan.end.initial_state.copy()
                log.final_state = x.copy()
        except DivergenceError as e:
            log.aborted = True
            log.message = str(e)
            logger.error(f"❌ run aborted after {len(log.samples)} samples: {e}")
            raise RunAbortedError(f"closed loop aborted: {e}", log=log, index=len(log.samples)) from e
        finally:
            log.wall_time = time.perf_counter() - started

        log.message = "reached equilibrium tolerance" if self._at_equilibrium(x) else "step budget exhausted"
        log.schedule.validate(self.N)
        logger.info(f"✅ {algorithm} finished: {len(log.samples)} samples, {len(log.events)} events, "
                    f"cost {log.closed_loop_cost:.6e}, warnings {log.warning_count}, "
                    f"violations {log.violation_count}, splices {log.splice_count}")
        return log

    # -------------------------------------------------------------------------
    # solver bookkeeping
    # -------------------------------------------------------------------------

    def _solve(self, x: np.ndarray, warm_start, warm_hessian: Optional[np.ndarray] = None) -> OcpSolution:
        started = time.perf_counter()
        solution = solve(self.sys, x, self.N, warm_start=warm_start, options=self.options,
                         warm_hessian=warm_hessian)
        self._log.solve_time += time.perf_counter() - started
        self._log.solver_calls += 1
        self._log.solver_iterations += solution.solver_report.iterations
        if not solution.converged:
            self._unconverged += 1
            logger.warning(f"⚠️ unconverged solve at x={x}: {solution.solver_report.message}")
        return solution

    def _resolve_at(self, sol: OcpSolution, j: int) -> OcpSolution:
        """u_N(.; x_u(j; x)) warm-started from the tail of sol and its shifted inverse Hessian."""
        return self._solve(sol.trajectory[j], shift_warm_start(sol, j), shift_inverse_hessian(sol, j))

    def _at_equilibrium(self, x: np.ndarray) -> bool:
        if self.stop_tol is None:
            return False
        return float(np.max(np.abs(x - self.sys.equilibrium_state))) <= self.stop_tol

    # -------------------------------------------------------------------------
    # events
    # -------------------------------------------------------------------------

    def _classical_event(self, sol: OcpSolution) -> _EventPlan:
        end = self._resolve_at(sol, 1)
        check = check_mstep(sol, end.value, 1, self.alpha_bar)
        if not check.satisfied:
            logger.warning(f"⚠️ relaxed Lyapunov inequality violated: alpha={check.alpha_local:.4f} < {self.alpha_bar}")
        return _EventPlan(applied=sol, m=1, end=end, alphas=[check.alpha_local], violation=not check.satisfied)

    def _certify(self, sol: OcpSolution) -> Tuple[int, List[float], Dict[int, OcpSolution], bool]:
        """Step (1): smallest j whose m-step inequality holds."""
        alphas: List[float] = []
        candidates: Dict[int, OcpSolution] = {}
        for j in range(1, self.N):
            candidates[j] = self._resolve_at(sol, j)
            check = check_mstep(sol, candidates[j].value, j, self.alpha_bar)
            alphas.append(check.alpha_local)
            logger.debug(f"  j={j}: V_next={candidates[j].value:.6e} alpha={check.alpha_local:.6f}")
            if check.satisfied:
                return j, alphas, candidates, False
        logger.warning(f"⚠️ {DIVERGE_MESSAGE}: no j <= {self.N - 1} reaches alpha_bar={self.alpha_bar}")
        return 1, alphas, candidates, True

    def _certified_event(self, sol: OcpSolution, algorithm: str) -> _EventPlan:
        m, alphas, candidates, warning = self._certify(sol)
        plan = _EventPlan(applied=sol, m=m, end=candidates[m], alphas=alphas, warning=warning)
        if algorithm == "basic" or m == 1:
            return plan

        anchor = sol.value
        end_value_old = plan.end.value
        for j in range(1, m):
            current = plan.applied
            resolved = candidates[j] if current is sol else self._resolve_at(current, j)
            result = splice(current, resolved, j, m)
            spliced = evaluate_controls(self.sys, current.initial_state, result.new_controls)
            end_new = self._solve(spliced.trajectory[m], shift_warm_start(spliced, m),
                                  shift_inverse_hessian(current, m))

            if algorithm == "update_a":
                condition = "A"
                check = check_update_A(anchor, current, resolved, end_new.value, j, m, self.alpha_bar)
            else:
                condition = "B"
                check = check_update_B(end_new.value, end_value_old, result.old_tail_costs,
                                       result.new_tail_costs, self.alpha_bar, V_ref=anchor)

            changed = bool(check.satisfied and not np.array_equal(result.new_controls, current.controls))
            plan.updates.append(UpdateOutcome(
                j=j,
                condition=condition,
                satisfied=check.satisfied,
                splice_applied=check.satisfied,
                controls_changed=changed,
                lhs=check.lhs,
                rhs=check.rhs,
                alpha_local=check.alpha_local,
            ))
            if check.satisfied:
                logger.info(f"🔁 condition {condition} holds at j={j}/{m}: loop closed early")
                plan.applied = spliced
                plan.end = end_new
                end_value_old = end_new.value
            else:
                logger.debug(f"  condition {condition} fails at j={j}: lhs={check.lhs:.6e} rhs={check.rhs:.6e}")
        return plan

    def _record(self, log: ExecutionLog, sol: OcpSolution, plan: _EventPlan):
        index = len(log.events)
        start = log.schedule.back()
        spliced_at = {update.j for update in plan.updates if update.splice_applied}
        warning_code = WARNING_DIVERGE if plan.warning else (WARNING_VIOLATION if plan.violation else WARNING_NONE)

        for k in range(plan.m):
            step_index = start + k
            log.samples.append(SampleRecord(
                step=step_index,
                time=step_index * self.sys.sampling_period,
                state=plan.applied.trajectory[k].copy(),
                control=plan.applied.controls[k].copy(),
                stage_cost=float(plan.applied.stage_costs[k]),
                event=index,
                m=plan.m,
                alpha_local=plan.alphas[-1] if k == 0 else float("nan"),
                warning=warning_code if k == 0 else WARNING_NONE,
                update_j=k if k in spliced_at else None,
            ))
            if k in spliced_at:
                log.schedule.append(step_index)
        log.schedule.append(start + plan.m)

        event_cost = math.fsum(plan.applied.stage_costs[:plan.m])
        log.events.append(EventRecord(
            index=index,
            start=start,
            m=plan.m,
            alphas=list(plan.alphas),
            warning=plan.warning,
            violation=plan.violation,
            updates=list(plan.updates),
            value_before=sol.value,
            value_after=plan.end.value,
            event_cost=event_cost,
            accumulated_cost=log.closed_loop_cost,
            unconverged_solves=self._unconverged,
            suggestion=PROLONGATION_HINT if plan.warning else "",
        ))
        logger.info(f"event {index}: s={start} m_n={plan.m} alpha={plan.alphas[-1]:.4f} "
                    f"min alpha={log.events[-1].smallest_alpha:.4f} "
                    f"V_N {sol.value:.6e} -> {plan.end.value:.6e}")


# =============================================================================
# PUBLIC ENTRY POINTS
# =============================================================================

def run_basic(sys: ControlSystem, x0, N: int, alpha_bar: float, steps: int = DEFAULT_STEPS,
              stop_tol: Optional[float] = STOP_TOLERANCE, options: Optional[SolverOptions] = None) -> ExecutionLog:
    return ClosedLoopRunner(sys, N, alpha_bar, options, stop_tol).run("basic", x0, steps)


def run_update_A(sys: ControlSystem, x0, N: int, alpha_bar: float, steps: int = DEFAULT_STEPS,
                 stop_tol: Optional[float] = STOP_TOLERANCE, options: Optional[SolverOptions] = None) -> ExecutionLog:
    return ClosedLoopRunner(sys, N, alpha_bar, options, stop_tol).run("update_a", x0, steps)


def run_update_B(sys: ControlSystem, x0, N: int, alpha_bar: float, steps: int = DEFAULT_STEPS,
                 stop_tol: Optional[float] = STOP_TOLERANCE, options: Optional[SolverOptions] = None) -> ExecutionLog:
    return ClosedLoopRunner(sys, N, alpha_bar, options, stop_tol).run("update_b", x0, steps)


def run_classical(sys: ControlSystem, x0, N: int, alpha_bar: float, steps: int = DEFAULT_STEPS,
                  stop_tol: Optional[float] = STOP_TOLERANCE, options: Optional[SolverOptions] = None) -> ExecutionLog:
    return ClosedLoopRunner(sys, N, alpha_bar, options, stop_tol).run("classical", x0, steps)


def run_algorithm(algorithm: str, sys: ControlSystem, x0, N: int, alpha_bar: float,
                  steps: int = DEFAULT_STEPS, stop_tol: Optional[float] = STOP_TOLERANCE,
                  options: Optional[SolverOptions] = None) -> ExecutionLog:
    return ClosedLoopRunner(sys, N, alpha_bar, options, stop_tol).run(algorithm, x0, steps)


@dataclass
class HorizonScanRow:
    N: int
    algorithm: str
    violations: int
    warnings: int
    smallest_alpha: float
    first_violation: Optional[int]
    samples: int
    events: int
    closed_loop_cost: float
    solver_calls: int
    solver_iterations: int
    solve_time: float
    message: str


def scan_horizons(sys: ControlSystem, x0, horizons, alpha_bar: float, algorithm: str = "classical",
                  steps: int = DEFAULT_STEPS, stop_tol: Optional[float] = STOP_TOLERANCE,
                  options: Optional[SolverOptions] = None,
                  stop_at_first_violation: bool = False) -> List[HorizonScanRow]:
    """One closed-loop run per horizon, in the order given.

    With `stop_at_first_violation` the scan ends at the first horizon whose
    run records a violation or a warning; scan horizons in descending order
    to find the largest such N.
    """
    rows: List[HorizonScanRow] = []
    for N in horizons:
        log = run_algorithm(algorithm, sys, x0, int(N), alpha_bar, steps=steps, stop_tol=stop_tol, options=options)
        first = next((event.index for event in log.events if event.violation or event.warning), None)
        rows.append(HorizonScanRow(
            N=int(N),
            algorithm=algorithm,
            violations=log.violation_count,
            warnings=log.warning_count,
            smallest_alpha=log.smallest_alpha,
            first_violation=first,
            samples=len(log.samples),
            events=len(log.events),
            closed_loop_cost=log.closed_loop_cost,
            solver_calls=log.solver_calls,
            solver_iterations=log.solver_iterations,
            solve_time=log.solve_time,
            message=log.message,
        ))
        logger.info(f"📏 N={N}: violations {log.violation_count}, warnings {log.warning_count}, "
                    f"min alpha {log.smallest_alpha:.4f}, {len(log.samples)} samples")
        if stop_at_first_violation and first is not None:
            break
    return rows


def largest_violating_horizon(rows: List[HorizonScanRow]) -> Optional[int]:
    """Largest N in a scan with at least one violation or warning."""
    return max((row.N for row in rows if row.violations or row.warnings), default=None)


def closed_loop_cost(log: ExecutionLog) -> float:
    """Finite-time truncation of the closed-loop cost J_inf."""
    return log.closed_loop_cost


def certificate_holds(log: ExecutionLog) -> bool:
    """Telescoped relaxed Lyapunov inequalities over the certified events.

    alpha_bar * sum(certified event costs) <= V_N(x_0) - V_N(x_last)
    + 1e-9 * (#events) * max(1, V_N(x_0)). Meaningful for warning-free logs.
    """
    if not log.events:
        return True
    certified = math.fsum(event.event_cost for event in log.events if event.certified)
    slack = VALUE_SLACK * len(log.events) * max(1.0, abs(log.initial_value))
    return log.alpha_bar * certified <= log.initial_value - log.final_value + slack


def performance_chain(log: ExecutionLog, V_infinity: float, rel_tol: float = 1e-6) -> bool:
    """alpha V_inf <= alpha J_cl <= V_N(x_0) <= V_inf, each up to rel_tol."""
    a = log.alpha_bar
    cost = log.closed_loop_cost
    V0 = log.initial_value
    tol = rel_tol * max(1.0, abs(V_infinity))
    return a * V_infinity <= a * cost + tol and a * cost <= V0 + tol and V0 <= V_infinity + tol
