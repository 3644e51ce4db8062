import math

import numpy as np
import pytest

from crackstab.closedform import analytic_lambda1
from crackstab.elliptic import SlopeConfig
from crackstab.errors import OperatorNotPositiveError, OutOfRangeError
from crackstab.geometry import CrackedRectangle, CrackFunction, cosine_bump, sine_mode
from crackstab.secondvar import CoefficientA, solve_v_phi
from crackstab.elliptic import dirichlet_energy
from crackstab.spectral import (
    Method,
    apply_T,
    check_positive,
    dual_mu,
    energy_identity_gap,
    lambda1_analytic,
    lambda1_grid,
    lambda1_modes,
    mode_matrix,
    resolvent,
    sim_inner,
)

SQUARE = CrackedRectangle(1.0, 1.0, 0.0, 65, 65)


def _random(domain, seed):
    rng = np.random.default_rng(seed)
    return CrackFunction(rng.standard_normal(domain.nx - 2), domain)


def test_resolvent_inverts_the_crack_operator():
    # -phi'' = pi^2 sin(pi x) has solution sin(pi x)
    d = CrackedRectangle(1.0, 1.0, 0.0, 257, 9)
    f = CrackFunction.from_callable(d, lambda x: np.pi**2 * np.sin(np.pi * x))
    assert np.allclose(resolvent(f).values, np.sin(np.pi * d.x_interior), atol=1e-4)


def test_T_is_self_adjoint_and_matches_the_energy():
    sc = SlopeConfig(1.0, 2.0)
    a = CoefficientA.constant(0.5)
    phi, psi = _random(SQUARE, 1), _random(SQUARE, 2)
    lhs = sim_inner(apply_T(phi, sc, a), psi, a)
    rhs = sim_inner(phi, apply_T(psi, sc, a), a)
    assert lhs == pytest.approx(rhs, rel=1e-10)
    energy = 2.0 * dirichlet_energy(solve_v_phi(SQUARE, phi, sc))
    assert sim_inner(apply_T(phi, sc, a), phi, a) == pytest.approx(energy, rel=1e-10)
    assert energy_identity_gap(phi, sc, a) < 1e-10


def test_T_is_monotone_in_the_coefficient():
    # a larger a gives a smaller resolvent, hence a smaller lambda1
    lam0 = lambda1_grid(SQUARE, SlopeConfig(), basis_size=16).lambda1
    lam1 = lambda1_grid(SQUARE, SlopeConfig(), CoefficientA.constant(5.0), basis_size=16).lambda1
    assert lam1 < lam0


def test_nonpositive_operator_is_rejected():
    with pytest.raises(OperatorNotPositiveError):
        check_positive(SQUARE, CoefficientA.constant(-20.0))
    assert check_positive(SQUARE, CoefficientA.constant(-5.0)) > 0


def test_grid_eigenpair_on_the_unit_square():
    d = CrackedRectangle(1.0, 1.0, 0.0, 129, 129)
    rep = lambda1_grid(d, SlopeConfig())
    assert rep.method is Method.GRID_GALERKIN
    assert rep.lambda1 == pytest.approx(analytic_lambda1(1.0, 1.0), rel=1e-3)
    ref = cosine_bump(d, 2)
    ref = ref * (1.0 / math.sqrt(sim_inner(ref, ref)))
    dist = np.linalg.norm(rep.eigenfunction.values - ref.values) / np.linalg.norm(ref.values)
    assert dist < 1e-2
    assert rep.residual_strong < 5e-2
    assert rep.spectrum[0] >= rep.spectrum[-1]


def test_refinement_converges_at_second_order():
    lam = analytic_lambda1(1.0, 1.0)
    errs = [abs(lambda1_grid(CrackedRectangle(1.0, 1.0, 0.0, n, n), SlopeConfig(), basis_size=16).lambda1 - lam)
            for n in (33, 65, 129)]
    assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0


def test_power_iteration_cross_check():
    rep = lambda1_grid(SQUARE, SlopeConfig(), basis_size=16, cross_check=True)
    assert rep.iterations is not None


def test_mode_method_matches_closed_form():
    for ell, y0 in ((1.0, 1.0), (2.0, 0.5), (math.pi, 1.0)):
        rep = lambda1_modes(CrackedRectangle(ell, y0, 0.0, 65, 65), SlopeConfig(), 64)
        assert rep.lambda1 == pytest.approx(analytic_lambda1(ell, y0), abs=1e-12)


def test_mode_method_scales_with_slopes():
    rep = lambda1_modes(SQUARE, SlopeConfig(1.0, 2.0), 64)
    assert rep.lambda1 == pytest.approx(2.5 * analytic_lambda1(1.0, 1.0), rel=1e-12)
    M, t, w = mode_matrix(1.0, 1.0, SlopeConfig(), 16)
    assert np.allclose(M, M.T)
    with pytest.raises(OutOfRangeError):
        lambda1_modes(SQUARE, SlopeConfig(), 4)


def test_analytic_report():
    rep = lambda1_analytic(SQUARE, SlopeConfig())
    assert rep.lambda1 == analytic_lambda1(1.0, 1.0)
    assert sim_inner(rep.eigenfunction, rep.eigenfunction) == pytest.approx(1.0, rel=1e-12)
    assert rep.eigenfunction.values[31] < 0


def test_dual_reciprocity():
    d = CrackedRectangle(1.0, 1.0, 0.0, 129, 129)
    lam = lambda1_grid(d, SlopeConfig()).lambda1
    mu = dual_mu(d, SlopeConfig())
    assert lam * mu == pytest.approx(1.0, abs=1e-6)


def test_small_support_lowers_lambda1():
    d = CrackedRectangle(2.0, 1.0, 0.0, 129, 65)
    full = lambda1_grid(d, SlopeConfig(), basis_size=16, refine=False).lambda1
    local = lambda1_grid(d, SlopeConfig(), basis_size=8, support=(0.75, 1.25)).lambda1
    assert local < full
    with pytest.raises(OutOfRangeError):
        lambda1_grid(d, SlopeConfig(), basis_size=8, support=(0.99, 1.01))


def test_eigenfunction_sign_convention():
    rep = lambda1_grid(SQUARE, SlopeConfig(), basis_size=8)
    assert rep.eigenfunction.nodal[(SQUARE.nx - 1) // 2] <= 0
    assert sim_inner(rep.eigenfunction, rep.eigenfunction) == pytest.approx(1.0, rel=1e-10)
    with pytest.raises(OutOfRangeError):
        lambda1_grid(SQUARE, SlopeConfig(), basis_size=0)
    assert sine_mode(SQUARE, 1).values.shape == (SQUARE.nx - 2,)


def test_mode_matrix_even_block_is_diagonal():
    M, _, _ = mode_matrix(1.0, 1.0, SlopeConfig(), 64)
    assert M[1, 1] == pytest.approx(0.6366153, abs=1e-7)
    even = M[1::2, 1::2]
    assert np.allclose(even, np.diag(np.diag(even)), atol=1e-15)
    assert np.abs(M - M.T).max() <= 1e-10


@pytest.mark.parametrize("c", [0.0, 3.0])
def test_resolvent_of_a_sine_mode(c):
    d = CrackedRectangle(2.0, 1.0, 0.5, 513, 9)
    n = 3
    k = n * np.pi / d.length
    f = sine_mode(d, n)
    theta = resolvent(f, CoefficientA.constant(c), d)
    assert np.allclose(theta.values, f.values / (k * k + c), rtol=1e-4, atol=1e-8)


def test_eigenfunction_cosine_similarity():
    d = CrackedRectangle(2.0, 0.5, 0.0, 129, 129)
    phi = lambda1_grid(d, SlopeConfig(), basis_size=16).eigenfunction.values
    ref = cosine_bump(d, 2).values
    assert abs(phi @ ref) / (np.linalg.norm(phi) * np.linalg.norm(ref)) >= 0.999
