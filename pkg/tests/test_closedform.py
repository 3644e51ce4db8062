import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crackstab.closedform import (
    INEQUALITY_RHS,
    analytic_lambda1,
    even_eigenvalue,
    exact_eigenpair,
    inequality_witness,
    is_stable,
    no_root_check,
    series_g,
    tanh_ratio,
    threshold_length,
)
from crackstab.errors import OutOfRangeError, PoleProximityError
from crackstab.geometry import CrackedRectangle

# Frozen reference values, computed independently at 30 digits.
LAMBDA1_UNIT = 0.636615332160872
ELL_STAR_Y0_1 = 1.571856271895407


def test_frozen_values():
    assert analytic_lambda1(1.0, 1.0) == pytest.approx(LAMBDA1_UNIT, rel=1e-15)
    assert threshold_length(1.0) == pytest.approx(ELL_STAR_Y0_1, rel=1e-13)
    assert analytic_lambda1(threshold_length(1.0), 1.0) == pytest.approx(1.0, abs=1e-13)
    assert INEQUALITY_RHS == pytest.approx(0.2337005501361698, rel=1e-15)


def test_threshold_infinite_for_thin_rectangles():
    assert threshold_length(0.25) == math.inf
    assert threshold_length(0.2) == math.inf
    assert math.isfinite(threshold_length(0.26))


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(1e-2, 1e2))
def test_scaling_law(ell, y0, s):
    assert analytic_lambda1(s * ell, s * y0) == pytest.approx(s * analytic_lambda1(ell, y0), rel=1e-13)


@given(st.floats(1e-2, 1e2), st.floats(1e-2, 1e2), st.floats(1.001, 10))
def test_monotone_in_both_sides(ell, y0, f):
    lam = analytic_lambda1(ell, y0)
    assert analytic_lambda1(ell, f * y0) >= lam
    assert analytic_lambda1(f * ell, y0) >= lam


@given(st.floats(1e-2, 1e2), st.floats(1e-2, 1e2))
def test_lambda1_is_largest_even_eigenvalue(ell, y0):
    lam = analytic_lambda1(ell, y0)
    assert all(even_eigenvalue(ell, y0, n) <= lam * (1 + 1e-15) for n in range(4, 40, 2))
    assert lam < 4 * y0
    assert is_stable(ell, y0) == (lam < 1)


def test_rejects_bad_input():
    with pytest.raises(OutOfRangeError):
        analytic_lambda1(-1.0, 1.0)
    with pytest.raises(OutOfRangeError):
        analytic_lambda1(1.0, math.nan)
    with pytest.raises(OutOfRangeError):
        exact_eigenpair(1.0, 1.0, 3)


def test_series_near_pole():
    pole = even_eigenvalue(1.0, 1.0, 1)
    with pytest.raises(PoleProximityError) as info:
        series_g(pole, 1.0, 1.0)
    assert info.value.n == 1
    assert series_g(pole * (1 - 1e-6), 1.0, 1.0).value > 1e3
    assert series_g(pole * (1 + 1e-6), 1.0, 1.0).value < -1e3


def test_series_tail_bound_covers_truncation():
    lam = analytic_lambda1(1.0, 1.0)
    coarse = series_g(lam, 1.0, 1.0, n_max=101)
    fine = series_g(lam, 1.0, 1.0, n_max=100_001)
    assert abs(coarse.value - fine.value) <= coarse.tail_bound + fine.tail_bound


@pytest.mark.parametrize("ell,y0", [(1.0, 1.0), (2.0, 0.5), (math.pi, 1.0), (0.1, 3.0), (10.0, 0.1)])
def test_no_root(ell, y0):
    rep = no_root_check(ell, y0)
    assert rep.passed
    assert rep.g_at_lambda1 > 0


@given(st.floats(1e-3, 20.0))
def test_inequality(x):
    w = inequality_witness(x)
    assert w.ok
    assert w.lhs - w.rhs >= 0.09
    assert w.identity_gap <= 1e-10


def test_tanh_ratio_limit():
    assert tanh_ratio(1e-4) == pytest.approx(5 / 3, rel=1e-6)
    assert tanh_ratio(30.0) == pytest.approx(1 / 3, rel=1e-10)


def test_exact_eigenpair_solves_the_system():
    pair = exact_eigenpair(1.0, 0.5, 2, x0=0.3)
    x = np.linspace(0.3, 1.3, 11)
    assert np.allclose(pair.phi(x[[0, -1]]), 0.0, atol=1e-14)
    # lambda d_y v^+ = phi' on the crack
    h = 1e-6
    dv = (pair.v_upper(x, h) - pair.v_upper(x, -h)) / (2 * h)
    dphi = -pair.k * np.sin(pair.k * (x - 0.3))
    assert np.allclose(pair.lam * dv, dphi, atol=1e-6)
    assert np.allclose(pair.v_upper(x, 0.5), 0.0, atol=1e-14)
    # harmonic: v_xx + v_yy = 0 at an interior point
    xx, yy = 0.71, 0.2
    lap = (pair.v_upper(xx + h * 1e3, yy) + pair.v_upper(xx - h * 1e3, yy) + pair.v_upper(xx, yy + h * 1e3)
           + pair.v_upper(xx, yy - h * 1e3) - 4 * pair.v_upper(xx, yy)) / (h * 1e3) ** 2
    assert abs(lap) < 1e-4
    phi, v = pair.sample(CrackedRectangle(1.0, 0.5, 0.3, 17, 9))
    assert np.allclose(v.lower.values, v.upper.values)


def test_exact_eigenpair_has_no_overflow():
    pair = exact_eigenpair(1.0, 200.0, 40)
    assert np.all(np.isfinite(pair.v_upper(np.linspace(0, 1, 5), np.linspace(0, 200, 5))))
