import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crackstab.closedform import analytic_lambda1
from crackstab.elliptic import SlopeConfig
from crackstab.errors import OutOfRangeError
from crackstab.geometry import CrackedRectangle, CrackFunction, build_flow, cosine_bump, sine_mode
from crackstab.secondvar import (
    Classification,
    CoefficientA,
    classify,
    fd_check,
    fd_energy_derivatives,
    first_variation,
    quadratic_form,
)

SQUARE = CrackedRectangle(1.0, 1.0, 0.0, 65, 65)


def _random_phi(domain, seed):
    rng = np.random.default_rng(seed)
    k = np.arange(1, 9)
    c = rng.standard_normal(k.size) / k**2
    return CrackFunction.from_callable(domain, lambda x: np.sin(np.outer(np.pi * x, k)) @ c)


def test_form_at_the_exact_eigenfunction():
    # 2 E(v_phi) = lambda1 int phi'^2 for phi = cos(2 pi x) - 1, so Q = (1 - lambda1) 2 pi^2
    d = CrackedRectangle(1.0, 1.0, 0.0, 257, 257)
    rep = quadratic_form(d, cosine_bump(d, 2), SlopeConfig())
    expected = (1.0 - analytic_lambda1(1.0, 1.0)) * 2.0 * math.pi**2
    assert rep.total == pytest.approx(expected, rel=1e-3)
    assert rep.gradient_term == pytest.approx(2.0 * math.pi**2, rel=1e-3)
    assert rep.a_term == 0.0
    assert rep.total == rep.boundary_term + rep.gradient_term + rep.a_term


def test_constant_coefficient_term():
    rep = quadratic_form(SQUARE, sine_mode(SQUARE, 1), SlopeConfig(), CoefficientA.constant(2.0))
    assert rep.a_term == pytest.approx(2.0 * 0.5, rel=1e-12)
    assert rep.params["a"] == "const:2.0"


@given(st.integers(0, 10_000), st.floats(-3, 3).filter(lambda c: abs(c) > 1e-3))
def test_homogeneity(seed, c):
    phi = _random_phi(SQUARE, seed)
    q1 = quadratic_form(SQUARE, phi, SlopeConfig()).total
    qc = quadratic_form(SQUARE, phi * c, SlopeConfig()).total
    assert qc == pytest.approx(c * c * q1, rel=1e-10, abs=1e-12)


@given(st.integers(0, 10_000))
def test_parallelogram_law(seed):
    sc = SlopeConfig(1.0, 2.0)
    phi, psi = _random_phi(SQUARE, seed), _random_phi(SQUARE, seed + 1)
    Q = lambda f: quadratic_form(SQUARE, f, sc).total  # noqa: E731
    lhs = Q(phi + psi) + Q(phi - psi)
    rhs = 2 * Q(phi) + 2 * Q(psi)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_first_variation_values():
    d = CrackedRectangle(1.0, 1.0, 0.0, 257, 9)
    assert first_variation(d, sine_mode(d, 1), SlopeConfig()) == 0.0
    assert first_variation(d, sine_mode(d, 1), SlopeConfig(1.0, 2.0)) == pytest.approx(6 / math.pi, rel=1e-4)
    assert first_variation(d, cosine_bump(d, 2), SlopeConfig(1.0, 2.0)) == pytest.approx(-3.0, rel=1e-12)


@pytest.mark.parametrize("slopes", [(1.0, 1.0), (1.0, 2.0)])
def test_fd_check_passes_on_a_coarse_grid(slopes):
    rep = fd_check(SQUARE, sine_mode(SQUARE, 1), SlopeConfig(*slopes))
    assert rep.passed
    assert rep.h == pytest.approx(1e-3 * rep.t_max)
    assert rep.g0 == pytest.approx(1.0 + slopes[0] ** 2 + slopes[1] ** 2, rel=1e-12)


def test_fd_step_limits():
    flow = build_flow(SQUARE, sine_mode(SQUARE, 1), 0.5)
    with pytest.raises(OutOfRangeError):
        fd_energy_derivatives(SQUARE, flow, SlopeConfig(), flow.t_max / 2)
    with pytest.raises(OutOfRangeError):
        fd_energy_derivatives(SQUARE, flow, SlopeConfig(), -1e-3)
    with pytest.raises(OutOfRangeError):
        fd_check(SQUARE, CrackFunction.zero(SQUARE), SlopeConfig())


def test_classification_methods_agree():
    short = CrackedRectangle(1.0, 1.0, 0.0, 65, 65)
    long = CrackedRectangle(2.0, 1.0, 0.0, 65, 65)
    for method in ("analytic", "modes", "grid"):
        assert classify(short, SlopeConfig(), method=method).classification is Classification.POSITIVE_DEFINITE
        rep = classify(long, SlopeConfig(), method=method)
        assert rep.classification is Classification.INDEFINITE
        assert rep.label == "not a minimizer"
        assert rep.witness_total < 0


def test_classification_degenerate_band():
    d = CrackedRectangle(1.0, 1.0, 0.0, 65, 65)
    rep = classify(d, SlopeConfig(), method="analytic", tol=0.5)
    assert rep.classification is Classification.DEGENERATE
    assert rep.label == "inconclusive"


def test_classification_preconditions():
    with pytest.raises(OutOfRangeError):
        classify(SQUARE, SlopeConfig(1.0, 2.0))
    with pytest.raises(OutOfRangeError):
        classify(SQUARE, SlopeConfig(), CoefficientA.constant(1.0), method="modes")
    with pytest.raises(OutOfRangeError):
        classify(SQUARE, SlopeConfig(), method="bogus")


def test_coefficient_values():
    a = CoefficientA.from_values(np.linspace(0, 1, SQUARE.nx))
    assert a.on(SQUARE).shape == (SQUARE.nx - 2,)
    assert a.describe() == f"values[{SQUARE.nx}]"
    with pytest.raises(OutOfRangeError):
        CoefficientA.from_values(np.ones(3)).on(SQUARE)
    with pytest.raises(OutOfRangeError):
        CoefficientA.constant(math.inf)
    assert CoefficientA.constant(0.0).is_zero
