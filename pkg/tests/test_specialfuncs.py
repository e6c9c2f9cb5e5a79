"""Bessel and Hankel functions against identities and independent oracles."""

import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roomloc.specialfuncs import (
    bessel_j,
    bessel_j_orders,
    bessel_y,
    bessel_y_orders,
    hankel1,
    hankel1_01,
    hankel1_01_fast,
)

EULER_GAMMA = Fraction(mpmath.mpf(mpmath.euler).__float__())


def series_j(l, x, terms=80):
    """Ascending series of J_l summed in exact rational arithmetic."""
    q = Fraction(x) ** 2 / 4
    half = Fraction(x) / 2
    term = half**l / math.factorial(l)
    total = Fraction(0)
    for k in range(terms):
        total += term
        term = -term * q / ((k + 1) * (k + 1 + l))
    return float(total)


def series_y0(x, terms=80):
    """Y_0 from its ascending series; the polynomial parts are summed exactly."""
    q = Fraction(x) ** 2 / 4
    term = Fraction(1)
    j0 = Fraction(0)
    s = Fraction(0)
    harmonic = Fraction(0)
    for k in range(terms):
        j0 += term
        s += harmonic * term
        harmonic += Fraction(1, k + 1)
        term = -term * q / ((k + 1) ** 2)
    return 2 / math.pi * ((math.log(x / 2) + float(EULER_GAMMA)) * float(j0) - float(s))


# --- examples ---------------------------------------------------------------


def test_j_at_zero():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(1, 0.0) == 0.0
    assert bessel_j(7, 0.0) == 0.0


def test_first_zero_of_j0():
    # locate the zero with the series oracle and bisection, independently
    lo, hi = 2.0, 3.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if series_j(0, mid) > 0:
            lo = mid
        else:
            hi = mid
    assert abs(lo - 2.404825557695773) < 1e-12
    assert abs(bessel_j(0, 2.404825557695773)) < 1e-10


def test_wronskian_spot():
    l, x = 0, 1.7
    w = bessel_j(l + 1, x) * bessel_y(l, x) - bessel_j(l, x) * bessel_y(l + 1, x)
    assert abs(w - 2 / (math.pi * x)) < 1e-10


def test_y0_log_singularity():
    v = bessel_y(0, 1e-8)
    assert np.isfinite(v) and v < -10


def test_y0_series_oracle_at_one():
    assert abs(bessel_y(0, 1.0) - series_y0(1.0)) < 1e-10


def test_hankel_definition():
    assert hankel1(0, 1.0) == complex(bessel_j(0, 1.0), bessel_y(0, 1.0))


def test_hankel_large_argument_modulus():
    x = 50.0
    assert abs(abs(hankel1(0, x)) / math.sqrt(2 / (math.pi * x)) - 1) < 1e-2


def test_hankel_near_zero_never_nan():
    h = hankel1(0, 1e-9)
    assert np.isfinite(h.real) and np.isfinite(h.imag)
    assert h.imag < -10


def test_bad_arguments_raise():
    with pytest.raises(ValueError):
        bessel_y(0, 0.0)
    with pytest.raises(ValueError):
        bessel_j(0, -1.0)
    with pytest.raises(ValueError):
        hankel1(0, 0.0)
    with pytest.raises(ValueError):
        bessel_j(0, float("nan"))
    with pytest.raises(ValueError):
        bessel_j(500, 1.0)


# --- identities ---------------------------------------------------------------

XS = np.array([0.1, 1.0, 5.0, 20.0, 50.0])


def test_wronskian_grid():
    j = bessel_j_orders(41, XS)
    y = bessel_y_orders(41, XS)
    w = j[1:] * y[:-1] - j[:-1] * y[1:]
    expected = 2 / (math.pi * XS)
    assert np.max(np.abs(w / expected - 1)) < 1e-10


@pytest.mark.parametrize("orders", [bessel_j_orders, bessel_y_orders])
def test_three_term_recurrence(orders):
    f = orders(41, XS)
    l = np.arange(1, 41)[:, None]
    lhs = f[:-2] + f[2:]
    rhs = 2 * l / XS * f[1:-1]
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    assert np.max(np.abs(lhs - rhs) / scale) < 1e-9


@given(st.integers(0, 40), st.floats(0.0, 60.0))
def test_negative_order_symmetry(l, x):
    assert bessel_j(-l, x) == (-1) ** l * bessel_j(l, x)
    if x > 0:
        assert bessel_y(-l, x) == (-1) ** l * bessel_y(l, x)


def test_power_series_oracle():
    rng = np.random.default_rng(5)
    xs = np.concatenate([[0.01, 0.5, 1.0, 3.7, 10.0], 10 * rng.random(10)])
    for x in xs:
        vals = bessel_j_orders(20, x)
        for l in range(21):
            assert abs(vals[l] - series_j(l, x)) < 1e-10, (l, x)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 12.0))
def test_y0_series_oracle(x):
    assert abs(bessel_y(0, x) - series_y0(x)) < 1e-10 * max(1.0, abs(series_y0(x)))


@pytest.mark.parametrize("l", [0, 1, 2, 5, 13, 30])
@pytest.mark.parametrize("x", [0.3, 2.0, 11.9, 12.1, 25.0, 49.0])
def test_arbitrary_precision_oracle(l, x):
    j_ref = float(mpmath.besselj(l, x))
    y_ref = float(mpmath.bessely(l, x))
    assert abs(bessel_j(l, x) - j_ref) < 1e-12
    assert abs(bessel_y(l, x) - y_ref) < 1e-11 * max(1.0, abs(y_ref))


def test_branch_crossover_continuity():
    eps = 1e-9
    for order in (0, 1):
        below = bessel_y(order, 12.0)
        above = bessel_y(order, 12.0 + eps)
        assert abs(above - below) < 1e-8


def test_fast_hankel_matches_direct():
    x = np.concatenate([np.geomspace(1e-3, 1.0, 200), np.linspace(1.0, 120.0, 5000)])
    h0, h1 = hankel1_01(x)
    f0, f1 = hankel1_01_fast(x)
    assert np.max(np.abs(f0 - h0)) < 1e-10
    assert np.max(np.abs(f1 - h1) / np.abs(h1)) < 1e-10


def test_fast_hankel_shape():
    x = np.linspace(0.5, 30.0, 12).reshape(3, 4)
    h0, h1 = hankel1_01_fast(x)
    assert h0.shape == (3, 4) and h1.shape == (3, 4)
