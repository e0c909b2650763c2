#!/usr/bin/env python3
"""
Sampled-Data Control Systems
============================

Discrete-time models x(n+1) = f(x(n), u(n)) used by the predictive controller:
- Zero-order-hold sampling of a continuous vector field with fixed-step RK4
- Integral stage cost accumulated on the same RK4 grid (augmented cost state)
- Purely discrete models whose map and cost are given directly
- Built-in benchmarks: synchronous generator and scalar linear-quadratic system

Vector fields, maps and costs must broadcast over leading axes: x has shape
(..., state_dim) and u has shape (..., control_dim). The optimizer relies on
this to roll out every finite-difference perturbation in a single pass.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from errors import DivergenceError, InputError, NumericError

logger = logging.getLogger(__name__)

DEFAULT_SUBSTEPS = 10
EQUILIBRIUM_TOLERANCE = 1e-10
BOUND_TOLERANCE = 1e-12

NEWTON_TOLERANCE = 1e-12
NEWTON_MAX_ITERATIONS = 50
SYNCGEN_SEED = (1.12, 0.0, 0.914)

VectorField = Callable[[np.ndarray, np.ndarray], np.ndarray]
DiscreteCost = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SyncGenParams:
    """Synchronous generator coefficients; u acts as a deviation of E."""
    b1: float = 34.29
    b2: float = 0.0
    b3: float = 0.149
    b4: float = 0.3341
    P: float = 28.22
    E: float = 0.2405


@dataclass(frozen=True, eq=False)
class ControlSystem:
    """Immutable bundle of dynamics, stage cost, bounds and equilibrium.

    Exactly one of `vector_field` (sampled continuous-time model) or
    `discrete_map` (with `discrete_cost`) must be given.
    """
    name: str
    state_dim: int
    control_dim: int
    equilibrium_state: np.ndarray
    equilibrium_control: np.ndarray
    sampling_period: float = 1.0
    cost_weight: float = 0.0
    vector_field: Optional[VectorField] = None
    control_bounds: Optional[Tuple[np.ndarray, np.ndarray]] = None
    substeps: int = DEFAULT_SUBSTEPS
    discrete_map: Optional[VectorField] = None
    discrete_cost: Optional[DiscreteCost] = None
    parameters: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.state_dim < 1 or self.control_dim < 1:
            raise InputError(f"{self.name}: dimensions must be positive")
        if not self.sampling_period > 0:
            raise InputError(f"{self.name}: sampling period must be positive, got {self.sampling_period}")
        if not self.cost_weight >= 0:
            raise InputError(f"{self.name}: cost weight must be nonnegative, got {self.cost_weight}")
        if self.substeps < 1:
            raise InputError(f"{self.name}: substeps must be at least 1")
        if (self.vector_field is None) == (self.discrete_map is None):
            raise InputError(f"{self.name}: give either a vector field or a discrete map")
        if self.discrete_map is not None and self.discrete_cost is None:
            raise InputError(f"{self.name}: a discrete map needs a discrete cost")

        x_star = _frozen(self.equilibrium_state, self.state_dim, "equilibrium state")
        u_star = _frozen(self.equilibrium_control, self.control_dim, "equilibrium control")
        object.__setattr__(self, "equilibrium_state", x_star)
        object.__setattr__(self, "equilibrium_control", u_star)

        if self.control_bounds is not None:
            lo = _frozen(self.control_bounds[0], self.control_dim, "lower bound")
            hi = _frozen(self.control_bounds[1], self.control_dim, "upper bound")
            if np.any(lo > hi) or np.any(u_star < lo) or np.any(u_star > hi):
                raise InputError(f"{self.name}: bounds must satisfy lo <= u* <= hi")
            object.__setattr__(self, "control_bounds", (lo, hi))

        if self.is_sampled:
            residual = np.max(np.abs(self.vector_field(x_star, u_star)))
        else:
            residual = np.max(np.abs(self.discrete_map(x_star, u_star) - x_star))
        if not residual <= EQUILIBRIUM_TOLERANCE:
            raise InputError(f"{self.name}: ({x_star}, {u_star}) is not an equilibrium (residual {residual:.3e})")

    @property
    def is_sampled(self) -> bool:
        return self.vector_field is not None

    def with_substeps(self, substeps: int) -> "ControlSystem":
        """Same model on a finer or coarser RK4 grid."""
        return replace(self, substeps=substeps)

    def propagate(self, x: np.ndarray, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Advance a batch of states one sampling period.

        No validation; non-finite results are left for the caller to detect.
        Returns (next states, stage costs) with the batch shape of x.
        """
        with np.errstate(over="ignore", invalid="ignore"):
            if not self.is_sampled:
                return self.discrete_map(x, u), self.discrete_cost(x, u)
            return self._sampled_flow(x, u)

    def _sampled_flow(self, x: np.ndarray, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        f = self.vector_field
        x_star = self.equilibrium_state
        h = self.sampling_period / self.substeps
        control_rate = self.cost_weight * np.sum((u - self.equilibrium_control) ** 2, axis=-1)
        cost = np.zeros(x.shape[:-1])

        for _ in range(self.substeps):
            k1 = f(x, u)
            x2 = x + 0.5 * h * k1
            k2 = f(x2, u)
            x3 = x + 0.5 * h * k2
            k3 = f(x3, u)
            x4 = x + h * k3
            k4 = f(x4, u)

            # RK4 quadrature weights on the stage points
            squared = (x - x_star) ** 2 + 2.0 * (x2 - x_star) ** 2 + 2.0 * (x3 - x_star) ** 2 + (x4 - x_star) ** 2
            cost = cost + np.sum(squared, axis=-1)
            x = x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        return x, h / 6.0 * cost + self.sampling_period * control_rate


def _frozen(values, dim: int, what: str) -> np.ndarray:
    array = np.array(values, dtype=float).reshape(-1)
    if array.shape != (dim,):
        raise InputError(f"{what} must have {dim} entries, got {array.size}")
    array.setflags(write=False)
    return array


def as_state(sys: ControlSystem, x) -> np.ndarray:
    """Validated copy of a single state vector."""
    state = np.atleast_1d(np.array(x, dtype=float))
    if state.shape != (sys.state_dim,):
        raise InputError(f"{sys.name}: state must have shape ({sys.state_dim},), got {np.shape(x)}")
    bad = np.flatnonzero(~np.isfinite(state))
    if bad.size:
        raise DivergenceError(f"{sys.name}: state coordinate {bad[0]} is not finite", coordinate=int(bad[0]))
    return state


def as_control(sys: ControlSystem, u) -> np.ndarray:
    """Validated copy of a single control vector (inside the box when bounded)."""
    control = np.atleast_1d(np.array(u, dtype=float))
    if control.shape != (sys.control_dim,):
        raise InputError(f"{sys.name}: control must have shape ({sys.control_dim},), got {np.shape(u)}")
    if not np.all(np.isfinite(control)):
        raise InputError(f"{sys.name}: control must be finite")
    if sys.control_bounds is not None:
        lo, hi = sys.control_bounds
        if np.any(control < lo - BOUND_TOLERANCE) or np.any(control > hi + BOUND_TOLERANCE):
            raise InputError(f"{sys.name}: control {control} outside bounds [{lo}, {hi}]")
    return control


def check_finite(sys: ControlSystem, x: np.ndarray, index: Optional[int] = None):
    """Raise DivergenceError naming the first non-finite coordinate of x."""
    bad = np.flatnonzero(~np.isfinite(x))
    if bad.size:
        where = f" at stage {index}" if index is not None else ""
        raise DivergenceError(
            f"{sys.name}: state coordinate {bad[0]} diverged{where}",
            index=index,
            coordinate=int(bad[0]),
        )


def step(sys: ControlSystem, x, u) -> np.ndarray:
    """One sampling period of the discrete-time map f(x, u)."""
    x_next, _ = sys.propagate(as_state(sys, x), as_control(sys, u))
    check_finite(sys, x_next)
    return x_next


def stage_cost(sys: ControlSystem, x, u) -> float:
    """Stage cost l(x, u) over one sampling period."""
    x_next, cost = sys.propagate(as_state(sys, x), as_control(sys, u))
    check_finite(sys, x_next)
    return float(cost)


# =============================================================================
# BENCHMARK SYSTEMS
# =============================================================================

def _syncgen_field(params: SyncGenParams) -> VectorField:
    b1, b2, b3, b4, P, E = params.b1, params.b2, params.b3, params.b4, params.P, params.E

    def vector_field(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        return np.stack([
            x2,
            -b1 * x3 * np.sin(x1) - b2 * x2 + P,
            b3 * np.cos(x1) - b4 * x3 + E + u[..., 0],
        ], axis=-1)

    return vector_field


def _syncgen_jacobian(params: SyncGenParams, x: np.ndarray) -> np.ndarray:
    x1, _, x3 = x
    return np.array([
        [0.0, 1.0, 0.0],
        [-params.b1 * x3 * np.cos(x1), -params.b2, -params.b1 * np.sin(x1)],
        [-params.b3 * np.sin(x1), 0.0, -params.b4],
    ])


def equilibrium_of(params: SyncGenParams) -> Tuple[np.ndarray, np.ndarray]:
    """Equilibrium of the generator with u = 0 by Newton's method.

    Seeded at the commonly quoted (1.12, 0.0, 0.914); raises NumericError if
    the residual does not reach 1e-12 within 50 iterations.
    """
    field_fn = _syncgen_field(params)
    u_star = np.zeros(1)
    x = np.array(SYNCGEN_SEED, dtype=float)

    for iteration in range(NEWTON_MAX_ITERATIONS + 1):
        residual = field_fn(x, u_star)
        if not np.all(np.isfinite(residual)):
            break
        if np.max(np.abs(residual)) <= NEWTON_TOLERANCE:
            logger.debug(f"Newton converged in {iteration} iterations: x* = {x}")
            return x, u_star
        if iteration == NEWTON_MAX_ITERATIONS:
            break
        try:
            x = x - np.linalg.solve(_syncgen_jacobian(params, x), residual)
        except np.linalg.LinAlgError as e:
            raise NumericError(f"singular Jacobian during equilibrium search: {e}") from e

    raise NumericError(f"equilibrium search did not converge in {NEWTON_MAX_ITERATIONS} iterations ({params})")


def make_syncgen(params: Optional[SyncGenParams] = None,
                 sampling_period: float = 0.1,
                 cost_weight: float = 1e-6,
                 substeps: int = DEFAULT_SUBSTEPS) -> ControlSystem:
    """Synchronous generator benchmark, steered to its refined equilibrium."""
    params = params or SyncGenParams()
    x_star, u_star = equilibrium_of(params)
    return ControlSystem(
        name="syncgen",
        state_dim=3,
        control_dim=1,
        equilibrium_state=x_star,
        equilibrium_control=u_star,
        sampling_period=sampling_period,
        cost_weight=cost_weight,
        vector_field=_syncgen_field(params),
        substeps=substeps,
        parameters=dict(vars(params)),
    )


def make_linear_scalar(a: float, b: float, q: float, r: float) -> ControlSystem:
    """x+ = a x + b u with stage cost q x^2 + r u^2 (the map is the model)."""
    if b == 0:
        raise InputError("linear_scalar: b = 0 makes the system uncontrollable")
    if not (q > 0 and r > 0):
        raise InputError(f"linear_scalar: q and r must be positive, got q={q}, r={r}")

    def discrete_map(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return a * x + b * u

    def discrete_cost(x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return q * x[..., 0] ** 2 + r * u[..., 0] ** 2

    return ControlSystem(
        name="linear_scalar",
        state_dim=1,
        control_dim=1,
        equilibrium_state=np.zeros(1),
        equilibrium_control=np.zeros(1),
        discrete_map=discrete_map,
        discrete_cost=discrete_cost,
        parameters={"a": a, "b": b, "q": q, "r": r},
    )
