#!/usr/bin/env python3
"""
Finite-Horizon Optimal Control
==============================

Direct single shooting for J_N(x0, u) = sum_{k<N} l(x_u(k; x0), u(k)):
- Decision variables are the N stacked controls; states come from rollout
- Projected BFGS with Armijo backtracking and curvature restarts
- Central finite-difference gradients, all perturbations rolled out as one batch
- Bellman tail values and shifted warm starts for receding-horizon use
- Riccati recursion for the scalar linear-quadratic oracle
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from dynamics import ControlSystem, as_control, as_state, check_finite
from errors import DivergenceError, InputError

logger = logging.getLogger(__name__)

MIN_HORIZON = 2
MAX_BACKTRACKS = 60


@dataclass(frozen=True)
class SolverOptions:
    """Stopping rule and line-search constants of the BFGS solver."""
    gradient_tolerance: float = 1e-8
    max_iterations: int = 500
    fd_relative_step: float = 1e-6
    armijo_constant: float = 1e-4
    backtrack_factor: float = 0.5

    def __post_init__(self):
        if not self.gradient_tolerance > 0:
            raise InputError("gradient_tolerance must be positive")
        if self.max_iterations < 0:
            raise InputError("max_iterations must be nonnegative")
        if not 0 < self.backtrack_factor < 1:
            raise InputError("backtrack_factor must lie in (0, 1)")


@dataclass(frozen=True)
class SolverReport:
    iterations: int
    gradient_norm: float
    converged: bool
    function_evaluations: int = 0
    message: str = ""
    warm_hessian: bool = False


@dataclass(frozen=True, eq=False)
class OcpSolution:
    """Open-loop control, predicted trajectory and costs for one horizon.

    `value` is the sum of `stage_costs`; for solver output it is V_N(x0).
    `solver_report` is None for sequences that were evaluated, not optimised.
    `inverse_hessian` is the final BFGS matrix over the stacked controls.
    """
    initial_state: np.ndarray
    horizon: int
    controls: np.ndarray
    trajectory: np.ndarray
    stage_costs: np.ndarray
    value: float
    solver_report: Optional[SolverReport] = None
    inverse_hessian: Optional[np.ndarray] = None

    @property
    def converged(self) -> bool:
        return self.solver_report is None or self.solver_report.converged


class Rollout(NamedTuple):
    trajectory: np.ndarray
    stage_costs: np.ndarray
    total_cost: float


def _as_controls(sys: ControlSystem, u) -> np.ndarray:
    controls = np.array(u, dtype=float)
    if sys.control_dim == 1 and controls.ndim <= 1:
        controls = controls.reshape(-1, 1)
    if controls.ndim != 2 or controls.shape[1] != sys.control_dim or controls.shape[0] < 1:
        raise InputError(f"{sys.name}: controls must have shape (K, {sys.control_dim}), got {np.shape(u)}")
    for k in range(controls.shape[0]):
        as_control(sys, controls[k])
    return controls


def rollout(sys: ControlSystem, x0, u) -> Rollout:
    """Open-loop trajectory x_u(.; x0), per-stage costs and their sum."""
    x = as_state(sys, x0)
    controls = _as_controls(sys, u)

    trajectory = np.empty((controls.shape[0] + 1, sys.state_dim))
    stage_costs = np.empty(controls.shape[0])
    trajectory[0] = x
    for k, control in enumerate(controls):
        x, cost = sys.propagate(x, control)
        check_finite(sys, x, index=k + 1)
        if not np.isfinite(cost):
            raise DivergenceError(f"{sys.name}: stage cost diverged at stage {k}", index=k)
        trajectory[k + 1] = x
        stage_costs[k] = cost

    return Rollout(trajectory, stage_costs, float(np.sum(stage_costs)))


def evaluate_controls(sys: ControlSystem, x0, u, report: Optional[SolverReport] = None) -> OcpSolution:
    """OcpSolution for a given control sequence (no optimisation)."""
    controls = _as_controls(sys, u)
    trajectory, stage_costs, total = rollout(sys, x0, controls)
    return OcpSolution(
        initial_state=trajectory[0].copy(),
        horizon=controls.shape[0],
        controls=controls,
        trajectory=trajectory,
        stage_costs=stage_costs,
        value=total,
        solver_report=report,
    )


class _ShootingProblem:
    """Cost of the stacked control vector, evaluated for whole batches."""

    def __init__(self, sys: ControlSystem, x0: np.ndarray, horizon: int):
        self.sys = sys
        self.x0 = x0
        self.horizon = horizon
        self.size = horizon * sys.control_dim
        self.evaluations = 0
        if sys.control_bounds is not None:
            self.lower = np.tile(sys.control_bounds[0], horizon)
            self.upper = np.tile(sys.control_bounds[1], horizon)
        else:
            self.lower = self.upper = None

    def project(self, z: np.ndarray) -> np.ndarray:
        if self.lower is None:
            return z
        return np.clip(z, self.lower, self.upper)

    def batch_cost(self, Z: np.ndarray) -> np.ndarray:
        """Total costs for a (B, size) batch; non-finite rollouts cost +inf."""
        batch = Z.shape[0]
        U = Z.reshape(batch, self.horizon, self.sys.control_dim)
        x = np.broadcast_to(self.x0, (batch, self.sys.state_dim))
        total = np.zeros(batch)
        for k in range(self.horizon):
            x, cost = self.sys.propagate(x, U[:, k, :])
            total = total + cost
        self.evaluations += batch
        finite = np.isfinite(total) & np.all(np.isfinite(x), axis=-1)
        return np.where(finite, total, np.inf)

    def cost(self, z: np.ndarray) -> float:
        return float(self.batch_cost(z[np.newaxis, :])[0])

    def gradient(self, z: np.ndarray, relative_step: float) -> np.ndarray:
        steps = relative_step * np.maximum(1.0, np.abs(z))
        offsets = np.diag(steps)
        values = self.batch_cost(np.vstack([z + offsets, z - offsets]))
        forward, backward = values[:self.size], values[self.size:]
        usable = np.isfinite(forward) & np.isfinite(backward)
        if not np.all(usable):
            logger.debug(f"{np.count_nonzero(~usable)} gradient entries dropped (non-finite perturbation)")
        with np.errstate(invalid="ignore"):
            return np.where(usable, (forward - backward) / (2.0 * steps), 0.0)

    def projected_gradient_norm(self, z: np.ndarray, g: np.ndarray) -> float:
        if self.lower is None:
            return float(np.max(np.abs(g))) if g.size else 0.0
        free = g.copy()
        free[(z <= self.lower) & (g > 0)] = 0.0
        free[(z >= self.upper) & (g < 0)] = 0.0
        return float(np.max(np.abs(free)))


def _bfgs(problem: _ShootingProblem, z0: np.ndarray, options: SolverOptions,
          H0: Optional[np.ndarray] = None):
    """Projected BFGS on the inverse Hessian; returns (z, report, H).

    H0 seeds the inverse Hessian; without it the first step starts from a
    scaled identity.
    """
    z = problem.project(z0)
    f = problem.cost(z)
    if not np.isfinite(f):
        raise DivergenceError(f"{problem.sys.name}: initial control guess produces a diverging rollout")

    g = problem.gradient(z, options.fd_relative_step)
    if H0 is None:
        H = np.eye(problem.size)
        first_step = True
    else:
        H = H0.copy()
        first_step = False
    message = "maximum iterations reached"
    iteration = 0

    while True:
        g_norm = problem.projected_gradient_norm(z, g)
        if g_norm <= options.gradient_tolerance:
            message = "gradient tolerance reached"
            break
        if iteration >= options.max_iterations:
            break

        direction = -H @ g
        if not g @ direction < 0:
            H = np.eye(problem.size)
            direction = -g
            first_step = True

        t = 1.0
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            z_trial = problem.project(z + t * direction)
            f_trial = problem.cost(z_trial)
            if np.isfinite(f_trial) and f_trial <= f + options.armijo_constant * (g @ (z_trial - z)):
                accepted = True
                break
            t *= options.backtrack_factor
        if not accepted or not np.any(z_trial != z):
            message = "line search made no progress"
            break

        g_trial = problem.gradient(z_trial, options.fd_relative_step)
        s = z_trial - z
        y = g_trial - g
        curvature = s @ y
        if curvature > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if first_step:
                H = (curvature / (y @ y)) * np.eye(problem.size)
                first_step = False
            rho = 1.0 / curvature
            Hy = H @ y
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (rho * rho * (y @ Hy) + rho) * np.outer(s, s)
        else:
            H = np.eye(problem.size)
            first_step = True

        z, f, g = z_trial, f_trial, g_trial
        iteration += 1

    report = SolverReport(
        iterations=iteration,
        gradient_norm=g_norm,
        converged=g_norm <= options.gradient_tolerance,
        function_evaluations=problem.evaluations,
        message=message,
        warm_hessian=H0 is not None,
    )
    return z, report, H


def solve(sys: ControlSystem, x0, N: int,
          warm_start=None,
          options: Optional[SolverOptions] = None,
          warm_hessian: Optional[np.ndarray] = None) -> OcpSolution:
    """u_N(.; x0) and V_N(x0) by direct single shooting.

    Never returns a value above the rolled-out cost of `warm_start`.
    `warm_hessian` seeds BFGS with an inverse Hessian over the N stacked
    controls, usually `shift_inverse_hessian` of the previous solution; a
    matrix with non-finite entries is ignored.
    Non-convergence is reported in `solver_report`, not raised.
    """
    options = options or SolverOptions()
    if N < MIN_HORIZON:
        raise InputError(f"horizon N must be at least {MIN_HORIZON}, got {N}")
    x0 = as_state(sys, x0)

    if warm_start is not None:
        guess = _as_controls(sys, warm_start)
        if guess.shape[0] != N:
            raise InputError(f"warm start must have {N} controls, got {guess.shape[0]}")
    else:
        guess = np.tile(sys.equilibrium_control, (N, 1))

    problem = _ShootingProblem(sys, x0, N)
    H0 = None
    if warm_hessian is not None:
        H0 = np.asarray(warm_hessian, dtype=float)
        if H0.shape != (problem.size, problem.size):
            raise InputError(f"warm Hessian must have shape ({problem.size}, {problem.size}), got {H0.shape}")
        if not np.all(np.isfinite(H0)):
            logger.debug("warm Hessian has non-finite entries; starting from the identity")
            H0 = None

    z, report, H = _bfgs(problem, guess.reshape(-1), options, H0)
    solution = replace(evaluate_controls(sys, x0, z.reshape(N, sys.control_dim), report), inverse_hessian=H)

    if warm_start is not None:
        baseline = evaluate_controls(sys, x0, guess, report)
        if baseline.value < solution.value:
            solution = replace(baseline, inverse_hessian=H)

    if not report.converged:
        logger.debug(f"solve N={N} stopped unconverged: {report.message} (|g|={report.gradient_norm:.2e})")
    return solution


def tail_value(sol: OcpSolution, j: int) -> float:
    """V_N(x0) minus the first j stage costs, i.e. V_{N-j} at x(j) by Bellman."""
    if not 0 <= j <= sol.horizon - 1:
        raise InputError(f"tail index must lie in [0, {sol.horizon - 1}], got {j}")
    return sol.value - math.fsum(sol.stage_costs[:j])


def shift_warm_start(prev: OcpSolution, m: int) -> np.ndarray:
    """Drop the first m controls and pad with copies of the last one."""
    if not 1 <= m <= prev.horizon - 1:
        raise InputError(f"shift must lie in [1, {prev.horizon - 1}], got {m}")
    padding = np.repeat(prev.controls[-1:], m, axis=0)
    return np.concatenate([prev.controls[m:], padding], axis=0)


def shift_inverse_hessian(prev: OcpSolution, m: int) -> Optional[np.ndarray]:
    """Inverse Hessian for the warm start `shift_warm_start(prev, m)`.

    The block of the kept controls moves to the front; the m padded controls
    get a diagonal block at the mean curvature of the kept ones. None when
    `prev` carries no matrix.
    """
    if not 1 <= m <= prev.horizon - 1:
        raise InputError(f"shift must lie in [1, {prev.horizon - 1}], got {m}")
    if prev.inverse_hessian is None:
        return None
    width = prev.controls.shape[1]
    offset = m * width
    kept = prev.inverse_hessian[offset:, offset:]
    shifted = np.zeros_like(prev.inverse_hessian)
    size = kept.shape[0]
    shifted[:size, :size] = 0.5 * (kept + kept.T)
    scale = float(np.mean(np.diag(kept)))
    if not (math.isfinite(scale) and scale > 0):
        return None
    shifted[size:, size:] = scale * np.eye(offset)
    return shifted


# =============================================================================
# LINEAR-QUADRATIC ORACLE
# =============================================================================

def riccati_value(a: float, b: float, q: float, r: float, N: int) -> float:
    """P with V_N(x) = P x^2 for x+ = a x + b u and l = q x^2 + r u^2.

    Horizon one leaves the control free, so P = q there.
    """
    if N < 1:
        raise InputError(f"horizon must be at least 1, got {N}")
    P = q
    for _ in range(N - 1):
        P = q + a * a * P - (a * b * P) ** 2 / (r + b * b * P)
    return P


def riccati_gain(a: float, b: float, q: float, r: float, remaining: int) -> float:
    """Optimal feedback gain K (u = -K x) with `remaining` stages left."""
    if remaining <= 1:
        return 0.0
    P = riccati_value(a, b, q, r, remaining - 1)
    return a * b * P / (r + b * b * P)


def riccati_stationary(a: float, b: float, q: float, r: float) -> float:
    """Stabilising root of the scalar algebraic Riccati equation (V_inf = P x^2)."""
    if b == 0:
        raise InputError("b = 0 has no stabilising Riccati solution")
    linear = r - a * a * r - q * b * b
    return (-linear + math.sqrt(linear * linear + 4.0 * b * b * q * r)) / (2.0 * b * b)
