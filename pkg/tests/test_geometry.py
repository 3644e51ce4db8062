import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crackstab.errors import OutOfRangeError
from crackstab.geometry import (
    CrackedRectangle,
    CrackFunction,
    build_flow,
    cosine_bump,
    crack_length,
    cutoff,
    cutoff_derivative,
    full_rows,
    graph_mean_curvature,
    pullback_metric,
    sine_mode,
)


def test_rectangle_grid(unit_square):
    d = unit_square
    assert d.hx == pytest.approx(1 / 64)
    assert d.x[0] == 0.0 and d.x[-1] == pytest.approx(1.0)
    assert d.crack_weights.sum() == pytest.approx(1.0)
    assert full_rows(d).shape == (2 * d.ny - 1,)
    assert full_rows(d)[0] == pytest.approx(-1.0) and full_rows(d)[-1] == pytest.approx(1.0)


@pytest.mark.parametrize("kw", [dict(length=0.0, half_height=1.0), dict(length=1.0, half_height=-1.0),
                                dict(length=1.0, half_height=1.0, nx=4), dict(length=math.inf, half_height=1.0)])
def test_rectangle_rejects_bad_parameters(kw):
    with pytest.raises(OutOfRangeError):
        CrackedRectangle(**kw)


def test_crack_function_endpoints(unit_square):
    nodal = np.sin(np.pi * unit_square.x)
    nodal[0] = nodal[-1] = 0.0
    phi = CrackFunction.from_nodes(unit_square, nodal)
    assert phi.nodal[0] == 0.0 and phi.nodal[-1] == 0.0
    bad = nodal + 1.0
    with pytest.raises(OutOfRangeError):
        CrackFunction.from_nodes(unit_square, bad)
    with pytest.raises(OutOfRangeError):
        cosine_bump(unit_square, 3)


def test_cutoff_profile():
    y = np.linspace(-1, 1, 41)
    c = cutoff(y, 0.5)
    assert c[20] == 1.0
    assert np.all(c[np.abs(y) >= 0.5] == 0.0)
    # derivative against a centred difference
    h = 1e-6
    fd = (cutoff(y + h, 0.5) - cutoff(y - h, 0.5)) / (2 * h)
    inner = np.abs(np.abs(y) - 0.5) > 1e-3
    assert np.allclose(cutoff_derivative(y, 0.5)[inner], fd[inner], atol=1e-6)


def _inverse_metric_oracle(p, q):
    """``det(J) J^-1 J^-T`` for ``J = [[1, 0], [p, q]]`` by explicit 2x2 algebra."""
    J = np.array([[1.0, 0.0], [p, q]])
    Jinv = np.linalg.inv(J)
    return np.linalg.det(J) * Jinv @ Jinv.T


def test_pullback_metric_matches_explicit_inverse():
    d = CrackedRectangle(1.0, 1.0, 0.0, 17, 17)
    flow = build_flow(d, sine_mode(d, 1), 0.5)
    t = 0.5 * flow.t_max
    A = pullback_metric(flow, t).A
    y = full_rows(d)
    for j in (d.ny - 1, d.ny + 2, d.ny - 4):
        for i in (1, 5, 11):
            p = t * flow.phi_prime[i] * flow.chi(y[j])
            q = 1.0 + t * flow.phi.nodal[i] * flow.chi_prime(y[j])
            assert np.allclose(A[j, i], _inverse_metric_oracle(p, q), rtol=1e-13, atol=1e-14)


def test_pullback_metric_identity_at_zero(unit_square):
    flow = build_flow(unit_square, cosine_bump(unit_square, 2), 0.5)
    assert pullback_metric(flow, 0.0).is_identity()


@given(st.integers(1, 5), st.floats(-0.99, 0.99), st.floats(0.1, 0.9))
def test_metric_is_spd_and_flow_orientation_preserving(k, frac, width):
    d = CrackedRectangle(2.0, 1.0, -1.0, 33, 17)
    flow = build_flow(d, sine_mode(d, k), width)
    t = frac * flow.t_max
    assert np.all(flow.jacobian_determinant(t) > 0)
    a11, a12, a22 = pullback_metric(flow, t).entries
    assert np.all(a11 > 0)
    assert np.all(a11 * a22 - a12**2 > 0)


def test_flow_beyond_t_max_is_rejected(unit_square):
    flow = build_flow(unit_square, sine_mode(unit_square, 1), 0.5)
    with pytest.raises(OutOfRangeError):
        pullback_metric(flow, 1.01 * flow.t_max)
    with pytest.raises(OutOfRangeError):
        build_flow(unit_square, sine_mode(unit_square, 1), 1.0)


def test_zero_flow_has_infinite_t_max(unit_square):
    flow = build_flow(unit_square, CrackFunction.zero(unit_square), 0.5)
    assert flow.t_max == math.inf
    assert crack_length(flow, 10.0) == pytest.approx(1.0)


def test_crack_length_against_fine_quadrature():
    d = CrackedRectangle(1.0, 1.0, 0.0, 2049, 9)
    flow = build_flow(d, sine_mode(d, 1), 0.5)
    t = 0.2
    x = np.linspace(0.0, 1.0, 1_000_001)
    ref = np.trapezoid(np.sqrt(1 + (t * np.pi * np.cos(np.pi * x)) ** 2), x)
    assert crack_length(flow, t) == pytest.approx(ref, rel=1e-6)


def test_curvature_sign_and_value():
    d = CrackedRectangle(1.0, 1.0, 0.0, 257, 9)
    flow = build_flow(d, sine_mode(d, 1), 0.5)
    t = 0.2
    H = graph_mean_curvature(flow, t)
    x = d.x
    exact = t * np.pi**2 * np.sin(np.pi * x) / (1 + (t * np.pi * np.cos(np.pi * x)) ** 2) ** 1.5
    assert np.allclose(H, exact, atol=1e-3)
    assert H[128] == pytest.approx(0.2 * np.pi**2, rel=1e-4)


def test_length_derivative_is_curvature_integral():
    # d/dt L(t) = int H_t phi dx for the graph y = t phi(x)
    d = CrackedRectangle(1.0, 1.0, 0.0, 1025, 9)
    flow = build_flow(d, sine_mode(d, 2), 0.5)
    t, h = 0.1, 1e-4
    dL = (crack_length(flow, t + h) - crack_length(flow, t - h)) / (2 * h)
    rhs = float(np.dot(d.crack_weights, graph_mean_curvature(flow, t) * flow.phi.nodal))
    assert dL == pytest.approx(rhs, rel=1e-4)
