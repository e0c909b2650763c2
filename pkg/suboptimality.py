#!/usr/bin/env python3
"""
Runtime Suboptimality Checks
============================

Relaxed Lyapunov inequalities evaluated along the closed loop:
- local alpha from a value decrease and the cost it pays for
- m-step inequality V_N(x_n) >= V_N(x_{n+1}) + alpha_bar * sum l
- control splice (old prefix, re-solved suffix)
- update condition A (anchored at V_N(x_n)) and update condition B
  (anchored at the un-spliced endpoint)

All comparisons carry the relative slack 1e-9 * max(1, |V|) because every
value involved comes out of a numerical optimizer.
"""

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from errors import ConsistencyError, InputError
from ocp import OcpSolution

VALUE_SLACK = 1e-9
COST_FLOOR = 1e-12
SPLICE_STATE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class AlphaCheck:
    """Outcome of one inequality: lhs <= rhs (+ slack) means satisfied.

    `alpha_local` is reported unclipped.
    """
    lhs: float
    rhs: float
    alpha_local: float
    satisfied: bool
    slack_used: float


@dataclass(frozen=True, eq=False)
class SpliceResult:
    new_controls: np.ndarray
    update_index: int
    old_tail_costs: np.ndarray
    new_tail_costs: np.ndarray


def value_slack(value: float) -> float:
    return VALUE_SLACK * max(1.0, abs(value))


def local_alpha(V_now: float, V_next: float, cost_sum: float) -> float:
    """(V_now - V_next) / cost_sum, or 1 when the cost sum is numerically zero."""
    if cost_sum < 0:
        raise InputError(f"cost sum must be nonnegative, got {cost_sum}")
    if cost_sum <= COST_FLOOR:
        return 1.0
    return (V_now - V_next) / cost_sum


def _check_alpha_bar(alpha_bar: float):
    if not 0 < alpha_bar <= 1:
        raise InputError(f"alpha_bar must lie in (0, 1], got {alpha_bar}")


def check_mstep(sol_now: OcpSolution, V_next: float, m: int, alpha_bar: float) -> AlphaCheck:
    """V_N(x_n) >= V_next + alpha_bar * sum_{k<m} l_k for the open loop of sol_now."""
    if not 1 <= m <= sol_now.horizon - 1:
        raise InputError(f"m must lie in [1, {sol_now.horizon - 1}], got {m}")
    _check_alpha_bar(alpha_bar)

    cost_sum = math.fsum(sol_now.stage_costs[:m])
    V_now = sol_now.value
    slack = value_slack(V_now)
    # written as "decrease demanded <= decrease achieved"
    lhs = V_next + alpha_bar * cost_sum
    return AlphaCheck(
        lhs=lhs,
        rhs=V_now,
        alpha_local=local_alpha(V_now, V_next, cost_sum),
        satisfied=lhs <= V_now + slack,
        slack_used=slack,
    )


def check_spliced(V_now: float, spliced: OcpSolution, V_end: float, m: int, alpha_bar: float) -> AlphaCheck:
    """m-step inequality for a (spliced) sequence against the anchor V_N(x_n).

    Unlike check_mstep the anchor is passed in, since the spliced sequence
    is not optimal at x_n and its own cost is not V_N(x_n).
    """
    if not 1 <= m <= spliced.horizon - 1:
        raise InputError(f"m must lie in [1, {spliced.horizon - 1}], got {m}")
    _check_alpha_bar(alpha_bar)

    cost_sum = math.fsum(spliced.stage_costs[:m])
    slack = value_slack(V_now)
    lhs = V_end + alpha_bar * cost_sum
    return AlphaCheck(
        lhs=lhs,
        rhs=V_now,
        alpha_local=local_alpha(V_now, V_end, cost_sum),
        satisfied=lhs <= V_now + slack,
        slack_used=slack,
    )


def splice(old: OcpSolution, resolved: OcpSolution, j: int, m: Optional[int] = None) -> SpliceResult:
    """Old controls before index j, controls re-solved at x(j) from j on.

    The tail cost lists cover stages j..m-1 (m defaults to the horizon).
    """
    N = old.horizon
    if not 1 <= j <= N - 1:
        raise InputError(f"splice index must lie in [1, {N - 1}], got {j}")
    m = N if m is None else m
    if not j < m <= N:
        raise InputError(f"splice window end must lie in ({j}, {N}], got {m}")
    if resolved.horizon < N - j:
        raise InputError(f"re-solved horizon {resolved.horizon} too short for splice at {j}")

    gap = np.max(np.abs(np.asarray(resolved.initial_state) - old.trajectory[j]))
    if not gap <= SPLICE_STATE_TOLERANCE:
        raise ConsistencyError(f"re-solved problem starts {gap:.3e} away from the open-loop state x({j})")

    new_controls = np.concatenate([old.controls[:j], resolved.controls[:N - j]], axis=0)
    return SpliceResult(
        new_controls=new_controls,
        update_index=j,
        old_tail_costs=np.array(old.stage_costs[j:m]),
        new_tail_costs=np.array(resolved.stage_costs[:m - j]),
    )


def check_update_A(V_now: float, old: OcpSolution, resolved: OcpSolution,
                   V_end_new: float, j: int, m: int, alpha_bar: float) -> AlphaCheck:
    """Update condition anchored at V_N(x_n).

    V_end_new - V_{N-j}(x(j)) <= (1 - a) sum_{k<j} l_old - a sum_{k=j}^{m-1} l_new(k-j)

    with V_{N-j}(x(j)) = V_now - sum_{k<j} l_old, which is tail_value(old, j)
    when old is the optimal sequence at x_n and stays anchored at V_N(x_n)
    when old has already been updated within the event.
    """
    N = old.horizon
    if not 1 <= j <= m - 1 <= N - 2:
        raise InputError(f"need 1 <= j <= m-1 <= N-2, got j={j}, m={m}, N={N}")
    if resolved.horizon < m - j:
        raise InputError(f"re-solved horizon {resolved.horizon} shorter than m - j = {m - j}")
    _check_alpha_bar(alpha_bar)

    head = math.fsum(old.stage_costs[:j])
    new_tail = math.fsum(resolved.stage_costs[:m - j])
    tail = V_now - head
    slack = value_slack(V_now)

    lhs = V_end_new - tail
    rhs = (1.0 - alpha_bar) * head - alpha_bar * new_tail
    return AlphaCheck(
        lhs=lhs,
        rhs=rhs,
        alpha_local=local_alpha(V_now, V_end_new, head + new_tail),
        satisfied=lhs <= rhs + slack,
        slack_used=slack,
    )


def check_update_B(V_end_new: float, V_end_old: float,
                   old_tail_costs: Sequence[float], new_tail_costs: Sequence[float],
                   alpha_bar: float, V_ref: Optional[float] = None) -> AlphaCheck:
    """Update condition anchored at the un-spliced endpoint value.

    V_end_new - V_end_old <= a * sum_k (l_old(k) - l_new(k))

    `alpha_local` is the alpha_bar at which the condition switches, or 1
    when both tails cost the same. Slack scales with V_ref (default V_end_old).
    """
    old_tail = np.asarray(old_tail_costs, dtype=float)
    new_tail = np.asarray(new_tail_costs, dtype=float)
    if old_tail.shape != new_tail.shape or old_tail.ndim != 1 or old_tail.size < 1:
        raise InputError(f"tail cost lists must have equal nonzero length, got {old_tail.size} and {new_tail.size}")
    _check_alpha_bar(alpha_bar)

    saving = math.fsum(old_tail) - math.fsum(new_tail)
    slack = value_slack(V_end_old if V_ref is None else V_ref)
    lhs = V_end_new - V_end_old
    rhs = alpha_bar * saving
    threshold = lhs / saving if abs(saving) > COST_FLOOR else 1.0
    return AlphaCheck(
        lhs=lhs,
        rhs=rhs,
        alpha_local=threshold,
        satisfied=lhs <= rhs + slack,
        slack_used=slack,
    )
