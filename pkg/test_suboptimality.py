#!/usr/bin/env python3
"""
Tests for the relaxed Lyapunov checks, control splicing and update conditions.
"""

import math

import numpy as np
import pytest

from dynamics import make_linear_scalar
from errors import ConsistencyError, InputError
from ocp import OcpSolution, evaluate_controls, riccati_gain, riccati_value, solve
from suboptimality import (check_mstep, check_spliced, check_update_A, check_update_B, local_alpha,
                           splice, value_slack)


def _costs_only(stage_costs, value=None):
    """OcpSolution carrying only stage costs and a value."""
    costs = np.asarray(stage_costs, dtype=float)
    N = costs.size
    return OcpSolution(
        initial_state=np.zeros(1),
        horizon=N,
        controls=np.zeros((N, 1)),
        trajectory=np.zeros((N + 1, 1)),
        stage_costs=costs,
        value=float(costs.sum()) if value is None else value,
    )


def _optimal(sys, x0, N):
    """Exact LQ optimal sequence from the Riccati feedback."""
    p = sys.parameters
    x = x0
    controls = []
    for k in range(N):
        u = -riccati_gain(p["a"], p["b"], p["q"], p["r"], N - k) * x
        controls.append(u)
        x = p["a"] * x + p["b"] * u
    return evaluate_controls(sys, [x0], controls)


class TestLocalAlpha:
    def test_examples(self):
        assert local_alpha(10.0, 8.0, 4.0) == pytest.approx(0.5)
        assert local_alpha(5.0, 5.0, 2.0) == 0.0
        assert local_alpha(3.0, 1.0, 0.0) == 1.0

    def test_may_leave_unit_interval(self):
        assert local_alpha(1.0, 3.0, 1.0) == pytest.approx(-2.0)
        assert local_alpha(10.0, 0.0, 2.0) == pytest.approx(5.0)

    @pytest.mark.parametrize("scale", [1e-6, 0.3, 7.0, 1e8])
    def test_scale_invariant(self, scale):
        assert local_alpha(10.0 * scale, 8.0 * scale, 4.0 * scale) == pytest.approx(0.5, rel=1e-12)

    def test_negative_cost_rejected(self):
        with pytest.raises(InputError):
            local_alpha(1.0, 0.5, -1.0)


class TestMultiStep:
    def test_boundary_case_satisfied(self):
        check = check_mstep(_costs_only([4.0, 3.0, 3.0]), 8.0, 1, 0.5)
        assert check.satisfied
        assert check.alpha_local == pytest.approx(0.5)
        assert check.lhs == pytest.approx(10.0)
        assert check.rhs == pytest.approx(10.0)

    def test_violation(self):
        check = check_mstep(_costs_only([4.0, 3.0, 3.0]), 9.5, 1, 0.5)
        assert not check.satisfied
        assert check.alpha_local == pytest.approx(0.125)

    def test_two_steps(self):
        check = check_mstep(_costs_only([4.0, 3.0, 3.0]), 6.0, 2, 0.5)
        assert check.satisfied
        assert check.alpha_local == pytest.approx(4.0 / 7.0)

    def test_slack_absorbs_rounding(self):
        V = 1e6
        sol = _costs_only([V / 2, V / 2], value=V)
        check = check_mstep(sol, V / 2 * (1 - 1e-16), 1, 1.0)
        assert check.slack_used == pytest.approx(value_slack(V))
        assert check.satisfied

    def test_preconditions(self):
        sol = _costs_only([1.0, 1.0, 1.0])
        with pytest.raises(InputError):
            check_mstep(sol, 1.0, 3, 0.5)
        with pytest.raises(InputError):
            check_mstep(sol, 1.0, 0, 0.5)
        with pytest.raises(InputError):
            check_mstep(sol, 1.0, 1, 0.0)

    def test_riccati_local_alpha(self, lq):
        N = 5
        P = riccati_value(2.0, 1.0, 1.0, 1.0, N)
        now = solve(lq, [1.0], N)
        following = solve(lq, now.trajectory[1], N)
        check = check_mstep(now, following.value, 1, 0.3)
        x1 = float(now.trajectory[1, 0])
        exact = (P - P * x1 * x1) / float(now.stage_costs[0])
        assert check.alpha_local == pytest.approx(exact, abs=1e-8)
        assert check.alpha_local > 0.99
        assert check.satisfied


class TestSplice:
    def test_prefix_and_suffix(self, lq):
        old = evaluate_controls(lq, [1.0], [-1.0, -0.5, -0.2, 0.0])
        resolved = evaluate_controls(lq, old.trajectory[2], [-0.3, -0.1, 0.0, 0.0])
        result = splice(old, resolved, 2, 3)
        np.testing.assert_allclose(result.new_controls[:, 0], [-1.0, -0.5, -0.3, -0.1])
        np.testing.assert_allclose(result.old_tail_costs, old.stage_costs[2:3])
        np.testing.assert_allclose(result.new_tail_costs, resolved.stage_costs[:1])
        assert result.update_index == 2

    def test_state_mismatch(self, lq):
        old = evaluate_controls(lq, [1.0], [-1.0, -0.5, -0.2])
        elsewhere = evaluate_controls(lq, [0.7], [0.0, 0.0, 0.0])
        with pytest.raises(ConsistencyError):
            splice(old, elsewhere, 1)

    def test_index_range(self, lq):
        old = evaluate_controls(lq, [1.0], [-1.0, -0.5, -0.2])
        with pytest.raises(InputError):
            splice(old, old, 0)
        with pytest.raises(InputError):
            splice(old, old, 3)


class TestUpdateConditions:
    def test_condition_a_example(self):
        old = _costs_only([2.0, 2.0, 2.0, 2.0])
        resolved = _costs_only([1.0, 1.0, 1.0])
        check = check_update_A(8.0, old, resolved, 5.0, j=1, m=3, alpha_bar=0.5)
        assert check.lhs == pytest.approx(-1.0)
        assert check.rhs == pytest.approx(0.0)
        assert check.satisfied

    def test_condition_a_preconditions(self):
        old = _costs_only([2.0, 2.0, 2.0, 2.0])
        resolved = _costs_only([1.0, 1.0, 1.0])
        with pytest.raises(InputError):
            check_update_A(8.0, old, resolved, 5.0, j=3, m=3, alpha_bar=0.5)
        with pytest.raises(InputError):
            check_update_A(8.0, old, resolved, 5.0, j=1, m=4, alpha_bar=0.5)

    def test_a_holds_while_b_fails(self):
        V_now, V_end_new, V_end_old, alpha_bar = 10.0, 4.0, 3.0, 0.5
        old = _costs_only([2.0, 1.0, 7.0], value=V_now)
        resolved = _costs_only([3.0, 1.0, 1.0])
        a = check_update_A(V_now, old, resolved, V_end_new, j=1, m=2, alpha_bar=alpha_bar)
        b = check_update_B(V_end_new, V_end_old, [1.0], [3.0], alpha_bar)
        assert a.satisfied
        assert not b.satisfied
        assert V_end_new > V_end_old
        assert check_mstep(old, V_end_old, 2, alpha_bar).satisfied

    def test_condition_b_identity_splice(self):
        check = check_update_B(4.0, 4.0, [1.0, 2.0], [1.0, 2.0], 0.4)
        assert check.satisfied
        assert check.lhs == 0.0
        assert check.rhs == 0.0
        assert check.alpha_local == 1.0

    def test_condition_b_threshold(self):
        check = check_update_B(3.0, 4.0, [3.0], [1.0], 0.5)
        assert check.satisfied
        assert check.alpha_local == pytest.approx(-0.5)

    def test_condition_b_shape_mismatch(self):
        with pytest.raises(InputError):
            check_update_B(1.0, 1.0, [1.0, 2.0], [1.0], 0.5)


def _random_instance(rng):
    a = rng.uniform(0.5, 2.5)
    b = rng.uniform(0.3, 2.0) * rng.choice([-1.0, 1.0])
    q = rng.uniform(0.2, 3.0)
    r = rng.uniform(0.2, 3.0)
    N = int(rng.integers(3, 8))
    m = int(rng.integers(2, N))
    j = int(rng.integers(1, m))
    x0 = rng.uniform(0.1, 2.0) * rng.choice([-1.0, 1.0])
    alpha_bar = rng.uniform(0.05, 0.95)
    return make_linear_scalar(a, b, q, r), N, m, j, x0, alpha_bar


def test_update_conditions_imply_spliced_inequality(rng):
    """200 scalar LQ instances with exact optimal sequences."""
    a_hits = b_hits = 0
    for _ in range(200):
        sys, N, m, j, x0, alpha_bar = _random_instance(rng)
        p = sys.parameters
        P_N = riccati_value(p["a"], p["b"], p["q"], p["r"], N)

        old = _optimal(sys, x0, N)
        resolved = _optimal(sys, float(old.trajectory[j, 0]), N)
        result = splice(old, resolved, j, m)
        spliced = evaluate_controls(sys, [x0], result.new_controls)
        V_now = old.value
        V_end_new = P_N * float(spliced.trajectory[m, 0]) ** 2
        V_end_old = P_N * float(old.trajectory[m, 0]) ** 2

        lhs = V_end_new + alpha_bar * math.fsum(spliced.stage_costs[:m])
        bound = V_now + 2e-9 * max(1.0, abs(V_now))

        a = check_update_A(V_now, old, resolved, V_end_new, j, m, alpha_bar)
        if a.satisfied:
            a_hits += 1
            assert lhs <= bound
            assert check_spliced(V_now, spliced, V_end_new, m, alpha_bar).lhs <= bound

        b = check_update_B(V_end_new, V_end_old, result.old_tail_costs, result.new_tail_costs,
                           alpha_bar, V_ref=V_now)
        base = check_mstep(old, V_end_old, m, alpha_bar)
        if b.satisfied and base.satisfied:
            b_hits += 1
            assert lhs <= bound

    assert a_hits > 0
    assert b_hits > 0
