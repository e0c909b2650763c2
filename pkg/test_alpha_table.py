#!/usr/bin/env python3
"""
Tests for the a priori suboptimality degrees alpha_{N,m}.
"""

import itertools

import pytest

from alpha_table import (ExpoControllability, alpha_curve_over_m, alpha_curve_over_N, alpha_grid, alpha_nm,
                         best_m, gamma, min_horizon)
from errors import InputError, NotFoundError

EXAMPLE = ExpoControllability(C=4.0, sigma=0.6)
GRID = [ExpoControllability(C, s) for C, s in itertools.product((1.5, 4.0, 10.0), (0.3, 0.6, 0.9))]


def _tol(value):
    return 1e-12 * max(1.0, abs(value))


def test_gamma_values():
    assert gamma(1, EXAMPLE) == pytest.approx(4.0)
    assert gamma(2, EXAMPLE) == pytest.approx(6.4)
    assert gamma(1, ExpoControllability(1.0, 0.3)) == pytest.approx(1.0)


def test_gamma_monotone_with_limit():
    values = [gamma(i, EXAMPLE) for i in range(1, 200)]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(EXAMPLE.gamma_limit, rel=1e-12)


def test_quoted_half_horizon_value():
    assert 0.289 <= alpha_nm(15, 6, EXAMPLE) <= 0.299
    assert alpha_nm(15, 6, EXAMPLE) == pytest.approx(0.294213, abs=1e-5)


def test_single_step_threshold():
    assert alpha_nm(25, 1, EXAMPLE) >= 0.275
    assert alpha_nm(24, 1, EXAMPLE) < 0.275


def test_min_horizon_single_step():
    assert min_horizon(0.275, 1, EXAMPLE) == 25


def test_min_horizon_best_policy():
    N = min_horizon(0.275, "best", EXAMPLE)
    assert N == 15
    assert alpha_nm(N, N // 2, EXAMPLE) >= 0.275


@pytest.mark.parametrize("sigma", [0.2, 0.6, 0.95])
@pytest.mark.parametrize("N", [2, 5, 17])
def test_unit_overshoot(sigma, N):
    ec = ExpoControllability(1.0, sigma)
    for m in range(1, N):
        assert alpha_nm(N, m, ec) == pytest.approx(1.0 - sigma ** N, rel=1e-12)


def test_unit_overshoot_min_horizon():
    ec = ExpoControllability(1.0, 0.6)
    assert min_horizon(0.5, "best", ec) == 2
    assert min_horizon(0.9, 1, ec) == 5


def test_short_horizons_can_be_negative():
    assert alpha_nm(2, 1, EXAMPLE) < 0.0


@pytest.mark.parametrize("ec", GRID, ids=lambda ec: f"C{ec.C}-s{ec.sigma}")
def test_half_horizon_is_maximal(ec):
    for N in range(2, 31):
        top = alpha_nm(N, N // 2, ec)
        for m in range(1, N):
            assert top >= alpha_nm(N, m, ec) - _tol(top)


@pytest.mark.parametrize("ec", GRID, ids=lambda ec: f"C{ec.C}-s{ec.sigma}")
def test_symmetric_in_m(ec):
    for N in range(2, 31):
        for m in range(1, N):
            left = alpha_nm(N, m, ec)
            assert left == pytest.approx(alpha_nm(N, N - m, ec), abs=_tol(left))


@pytest.mark.parametrize("ec", GRID, ids=lambda ec: f"C{ec.C}-s{ec.sigma}")
def test_improves_with_horizon(ec):
    for m in range(1, 29):
        for N in range(m + 1, 30):
            current = alpha_nm(N, m, ec)
            assert alpha_nm(N + 1, m, ec) >= current - _tol(current)


def test_long_horizons_stay_finite():
    ec = ExpoControllability(10.0, 0.9)
    value = alpha_nm(1000, 500, ec)
    assert 0.0 < value <= 1.0


def test_curves():
    curve = alpha_curve_over_m(15, EXAMPLE)
    assert len(curve) == 14
    assert curve[5] == pytest.approx(alpha_nm(15, 6, EXAMPLE))
    assert best_m(15, EXAMPLE) == 7
    over_N = alpha_curve_over_N(1, range(2, 30), EXAMPLE)
    assert list(over_N) == list(range(2, 30))
    assert over_N[25] >= 0.275


def test_grid_rows():
    table = alpha_grid(EXAMPLE, 15, m1_max=30)
    assert list(table.columns) == ["N", "m", "alpha"]
    assert len(table) == sum(N - 1 for N in range(2, 16)) + 15
    row = table[(table["N"] == 15) & (table["m"] == 6)]
    assert row["alpha"].iloc[0] == pytest.approx(0.294213, abs=1e-5)
    single = table[(table["m"] == 1) & (table["alpha"] >= 0.275)]
    assert single["N"].min() == 25


def test_validation():
    with pytest.raises(InputError):
        ExpoControllability(0.5, 0.6)
    with pytest.raises(InputError):
        ExpoControllability(4.0, 1.0)
    with pytest.raises(InputError):
        alpha_nm(5, 5, EXAMPLE)
    with pytest.raises(InputError):
        gamma(0, EXAMPLE)
    with pytest.raises(InputError):
        min_horizon(1.0, "best", EXAMPLE)


def test_unreachable_target():
    with pytest.raises(NotFoundError):
        min_horizon(0.999, 1, ExpoControllability(10.0, 0.9), cap=50)
