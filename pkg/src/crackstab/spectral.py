"""The operator ``T`` on crack functions, its largest eigenvalue and the dual problem.

The crack inner product is ``(phi, psi)~ = int phi' psi' + a phi psi``.  With
``v_phi`` from :mod:`crackstab.secondvar`, the operator is

    T phi = R(2 alpha d_x v_phi^+ + 2 beta d_x v_phi^-),

with ``R`` the resolvent of ``-d^2/dx^2 + a`` under zero endpoint values, and
``(T phi, phi)~ = 2 int |grad v_phi|^2``.  Discretely, ``d_x`` on the crack is
the central difference with zero end values, the Neumann data use the same
difference, and ``R`` is the three-point resolvent; with these choices the
identity above holds exactly up to solver round-off.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from crackstab.elliptic import (
    PairField,
    SlopeConfig,
    assemble_stiffness,
    crack_traces,
    dirichlet_energy,
)
from crackstab.errors import OperatorNotPositiveError, OutOfRangeError, SolverError
from crackstab.geometry import CrackedRectangle, CrackFunction, central_difference
from crackstab.secondvar import (
    CoefficientA,
    crack_form,
    pad_endpoints,
    solve_v_phi,
    solve_v_phi_many,
    v_phi_neumann,
)

logger = logging.getLogger(__name__)

POWER_CHECK_RTOL = 1e-3


class Method(enum.Enum):
    GRID_GALERKIN = "GridGalerkin"
    MODE_TRUNCATION = "ModeTruncation"
    ANALYTIC = "Analytic"


@dataclass(frozen=True)
class EigenReport:
    """Largest eigenvalue of ``T`` with its normalised eigenfunction.

    ``eigenfunction`` has unit ``~`` norm and is nonpositive at the crack
    midpoint.  ``spectrum`` lists all Ritz values in decreasing order.
    """

    lambda1: float
    eigenfunction: CrackFunction = field(repr=False)
    mu: float | None
    reciprocity: float | None
    residual_strong: float
    method: Method
    basis_size: int
    spectrum: tuple = field(default=(), repr=False)
    residuals: dict = field(default_factory=dict)
    iterations: int | None = None

    def with_dual(self, mu: float) -> "EigenReport":
        return EigenReport(self.lambda1, self.eigenfunction, mu, self.lambda1 * mu, self.residual_strong,
                           self.method, self.basis_size, self.spectrum, self.residuals, self.iterations)


def _coefficient(a) -> CoefficientA:
    return CoefficientA.zero() if a is None else a


# ---------------------------------------------------------------------------
# crack calculus


def sim_inner(phi: CrackFunction, psi: CrackFunction, a: CoefficientA | None = None) -> float:
    """``int phi' psi' + a phi psi`` on the crack grid."""
    if phi.domain != psi.domain:
        raise OutOfRangeError("crack functions live on different grids")
    grad, zeroth = crack_form(phi.domain, phi.values, psi.values, a)
    return grad + zeroth


def sim_norm(phi: CrackFunction, a: CoefficientA | None = None) -> float:
    return math.sqrt(max(sim_inner(phi, phi, a), 0.0))


def crack_stiffness_bands(domain: CrackedRectangle, a: CoefficientA | None = None):
    """Diagonal and off-diagonal of the matrix of the ``~`` form on interior nodes."""
    hx = domain.hx
    diag = 2.0 / hx + hx * _coefficient(a).on(domain)
    off = np.full(domain.nx - 3, -1.0 / hx)
    return diag, off


def crack_stiffness(domain: CrackedRectangle, a: CoefficientA | None = None) -> np.ndarray:
    """Dense matrix ``S_a`` with ``(phi, psi)~ = phi^T S_a psi``."""
    diag, off = crack_stiffness_bands(domain, a)
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


def check_positive(domain: CrackedRectangle, a: CoefficientA | None = None) -> float:
    """Smallest eigenvalue of ``S_a``; raise if ``(., .)~`` is not positive definite."""
    diag, off = crack_stiffness_bands(domain, a)
    lo = float(sla.eigvalsh_tridiagonal(diag, off, select="i", select_range=(0, 0))[0])
    if not lo > 0.0:
        raise OperatorNotPositiveError(
            f"the crack form int phi'^2 + a phi^2 is not positive definite "
            f"(smallest discrete eigenvalue {lo:.3e}); the positivity hypothesis on a fails"
        )
    return lo


def _resolve(domain: CrackedRectangle, load: np.ndarray, a: CoefficientA | None) -> np.ndarray:
    diag, off = crack_stiffness_bands(domain, a)
    ab = np.zeros((2, diag.size))
    ab[0, 1:] = off
    ab[1] = diag
    return sla.solveh_banded(ab, load)


def resolvent(f, a: CoefficientA | None = None, domain: CrackedRectangle | None = None) -> CrackFunction:
    """Solve ``-theta'' + a theta = f`` with ``theta = 0`` at both endpoints.

    ``f`` is a :class:`CrackFunction` or interior values together with ``domain``.
    """
    if isinstance(f, CrackFunction):
        domain, values = f.domain, f.values
    else:
        if domain is None:
            raise OutOfRangeError("a domain is required for raw crack data")
        values = np.asarray(f, dtype=float)
    check_positive(domain, a)
    return CrackFunction(_resolve(domain, domain.hx * values, a), domain)


def _crack_datum(domain: CrackedRectangle, slopes: SlopeConfig, up_trace, lo_trace) -> np.ndarray:
    """``2 alpha d_x v^+ + 2 beta d_x v^-`` from interior traces (columns allowed)."""
    w = slopes.alpha * up_trace + slopes.beta * lo_trace
    return 2.0 * central_difference(pad_endpoints(w), domain.hx)


def apply_T(phi: CrackFunction, slopes: SlopeConfig, a: CoefficientA | None = None) -> CrackFunction:
    """``T phi`` through one pair of half solves and one resolvent solve."""
    domain = phi.domain
    v = solve_v_phi(domain, phi, slopes)
    f = _crack_datum(domain, slopes, v.upper.values[0, 1:-1], v.lower.values[0, 1:-1])
    return resolvent(f, a, domain)


# ---------------------------------------------------------------------------
# strong-form residual


def auxil_residual(domain: CrackedRectangle, slopes: SlopeConfig, lam: float, phi: CrackFunction,
                   v: PairField, a: CoefficientA | None = None) -> dict:
    """Relative residuals of the strong eigen-system for ``(v, phi)`` at ``lam``.

    The equations are: ``v`` harmonic on each side; ``v = 0`` on the outer
    boundary; zero conormal data on crack parts outside the rectangle (there
    are none here); ``lam d_nu v^+- = +-slope phi'`` on the crack; and
    ``-phi'' + a phi = 2 alpha d_x v^+ + 2 beta d_x v^-``.  The last one is
    measured after applying the resolvent, in the ``~`` norm.
    """
    hx, hy = domain.hx, domain.hy
    out = {}

    lap = []
    for hf in (v.upper, v.lower):
        u = hf.values
        vxx = (u[1:-1, 2:] - 2 * u[1:-1, 1:-1] + u[1:-1, :-2]) / hx**2
        vyy = (u[2:, 1:-1] - 2 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / hy**2
        scale = max(np.max(np.abs(vxx)), np.max(np.abs(vyy)), np.finfo(float).tiny)
        lap.append(np.max(np.abs(vxx + vyy)) / scale)
    out["laplace"] = float(max(lap))

    vmax = max(v.max_abs(), np.finfo(float).tiny)
    edge = max(
        np.max(np.abs(hf.values[:, [0, -1]])) for hf in (v.upper, v.lower)
    )
    edge = max(edge, np.max(np.abs(v.upper.values[-1])), np.max(np.abs(v.lower.values[-1])))
    out["dirichlet"] = float(edge / vmax)

    out["free_crack"] = 0.0

    tr = crack_traces(v)
    g_up, g_lo = v_phi_neumann(domain, phi.values, slopes)
    gscale = max(np.max(np.abs(g_up)), np.max(np.abs(g_lo)), np.finfo(float).tiny)
    res_up = np.max(np.abs(lam * tr.upper_normal[1:-1] - g_up))
    res_lo = np.max(np.abs(lam * tr.lower_normal[1:-1] - g_lo))
    out["transmission"] = float(max(res_up, res_lo) / gscale)

    f = _crack_datum(domain, slopes, tr.upper[1:-1], tr.lower[1:-1])
    theta = resolvent(f, a, domain)
    norm = max(math.sqrt(max(sim_inner(phi, phi, a), 0.0)), np.finfo(float).tiny)
    out["crack_equation"] = float(math.sqrt(max(sim_inner(phi - theta, phi - theta, a), 0.0)) / norm)

    out["max"] = max(out.values())
    return out


# ---------------------------------------------------------------------------
# largest eigenvalue


def sine_basis(domain: CrackedRectangle, m: int, x_lo: float | None = None,
               x_hi: float | None = None) -> np.ndarray:
    """Columns ``sin(k pi (x - x_lo)/(x_hi - x_lo))``, ``k = 1..m``, at interior nodes.

    The functions are extended by zero outside ``[x_lo, x_hi]``.
    """
    x_lo = domain.x0 if x_lo is None else x_lo
    x_hi = domain.x0 + domain.length if x_hi is None else x_hi
    x = domain.x_interior
    r = (x - x_lo) / (x_hi - x_lo)
    inside = (r > 0) & (r < 1)
    k = np.arange(1, m + 1)
    return np.where(inside[:, None], np.sin(np.pi * np.outer(np.clip(r, 0, 1), k)), 0.0)


def _normalise(domain: CrackedRectangle, values: np.ndarray, a) -> tuple[np.ndarray, float]:
    diag, off = crack_stiffness_bands(domain, a)
    nrm2 = float(values @ (diag * values) + 2.0 * np.dot(off * values[:-1], values[1:]))
    scale = 1.0 / math.sqrt(nrm2)
    mid = values[(values.size - 1) // 2] if values.size % 2 else 0.5 * (
        values[values.size // 2 - 1] + values[values.size // 2])
    if mid > 0:
        scale = -scale
    return scale, nrm2


def galerkin_matrices(domain: CrackedRectangle, slopes: SlopeConfig, basis: np.ndarray,
                      a: CoefficientA | None = None):
    """``K_jk = (T s_k, s_j)~`` and ``G_jk = (s_k, s_j)~`` for the columns ``s_k``.

    Also returns the batched half solutions, needed to rebuild ``v_phi``.
    """
    up, lo = solve_v_phi_many(domain, basis, slopes)
    f = _crack_datum(domain, slopes, up[0, 1:-1, :], lo[0, 1:-1, :])
    K = domain.hx * basis.T @ f
    asym = np.max(np.abs(K - K.T)) / max(np.max(np.abs(K)), np.finfo(float).tiny)
    if asym > 1e-8:
        logger.warning("Galerkin matrix asymmetry %.2e", asym)
    K = 0.5 * (K + K.T)
    S = crack_stiffness(domain, a)
    G = basis.T @ S @ basis
    return K, 0.5 * (G + G.T), up, lo


def power_iteration(phi0: CrackFunction, slopes: SlopeConfig, a: CoefficientA | None = None,
                    tol: float = 1e-8, max_iter: int = 200) -> tuple[float, CrackFunction, int]:
    """Matrix-free largest eigenvalue of ``T`` from a start vector.

    Returns ``(lambda, phi, iterations)``; raises :class:`SolverError` with
    the iteration count if the Rayleigh quotient has not settled.
    """
    phi = phi0 * (1.0 / sim_norm(phi0, a))
    lam_old = math.nan
    for it in range(1, max_iter + 1):
        t_phi = apply_T(phi, slopes, a)
        lam = sim_inner(t_phi, phi, a)
        phi = t_phi * (1.0 / sim_norm(t_phi, a))
        if abs(lam - lam_old) <= tol * abs(lam):
            return lam, phi, it
        lam_old = lam
    raise SolverError(f"power iteration did not converge in {max_iter} iterations (last {lam_old:.10g})")


def _banded_upper(domain: CrackedRectangle, a) -> np.ndarray:
    diag, off = crack_stiffness_bands(domain, a)
    ab = np.zeros((2, diag.size))
    ab[0, 1:] = off
    ab[1] = diag
    return sla.cholesky_banded(ab)


def _upper_times(U: np.ndarray, z: np.ndarray) -> np.ndarray:
    out = U[1] * z
    out[:-1] += U[0, 1:] * z[1:]
    return out


def refine_eigenpair(phi0: CrackFunction, slopes: SlopeConfig, a: CoefficientA | None = None,
                     tol: float = 1e-12, max_matvec: int = 400) -> tuple[float, CrackFunction, int]:
    """Top eigenpair of the discrete ``T`` on the whole crack grid by Lanczos.

    ``T`` is symmetric in the ``~`` product, so with ``S_a = U^T U`` the
    matrix ``U T U^-1`` is symmetric; ``phi0`` is the start vector.
    Returns ``(lambda, phi, matvecs)``.
    """
    domain = phi0.domain
    U = _banded_upper(domain, a)
    count = [0]

    def matvec(x):
        count[0] += 1
        if count[0] > max_matvec:
            raise SolverError(f"Lanczos refinement exceeded {max_matvec} operator applications")
        y = sla.solve_banded((0, 1), U, np.ravel(x))
        return _upper_times(U, apply_T(CrackFunction(y, domain), slopes, a).values)

    n = domain.nx - 2
    op = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
    v0 = _upper_times(U, phi0.values)
    try:
        w, V = spla.eigsh(op, k=1, which="LA", v0=v0, tol=tol, ncv=min(12, n - 1))
    except spla.ArpackNoConvergence as exc:
        raise SolverError(f"Lanczos refinement did not converge after {count[0]} operator applications") from exc
    return float(w[0]), CrackFunction(sla.solve_banded((0, 1), U, V[:, 0]), domain), count[0]


def lambda1_grid(domain: CrackedRectangle, slopes: SlopeConfig, a: CoefficientA | None = None,
                 basis_size: int = 32, refine: bool = True, cross_check: bool = False,
                 support: tuple[float, float] | None = None) -> EigenReport:
    """``lambda1`` on the grid from a Galerkin solve in the first ``basis_size`` crack sines.

    Each column of the Galerkin matrix needs one elliptic solve per half;
    all columns share one factorisation.  With ``refine`` the Ritz pair
    seeds a Lanczos iteration for the top eigenpair of the discrete
    operator on the whole crack grid, which removes the basis truncation
    error; ``spectrum`` always holds the Ritz values.  ``support``
    restricts the basis to sines of a subinterval and disables refinement.
    With ``cross_check`` a warm-started power iteration confirms the result.
    """
    a = _coefficient(a)
    if not 1 <= basis_size <= domain.nx - 2:
        raise OutOfRangeError(f"basis_size must lie in [1, {domain.nx - 2}], got {basis_size}")
    check_positive(domain, a)
    basis = sine_basis(domain, basis_size, *(support or (None, None)))
    if support is not None:
        refine = False
        if np.count_nonzero(np.any(basis != 0, axis=1)) < max(4, basis_size):
            raise OutOfRangeError("support too small for the grid: fewer interior nodes than basis functions")
    K, G, up, lo = galerkin_matrices(domain, slopes, basis, a)
    try:
        evals, evecs = sla.eigh(K, G)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"generalized eigensolver failed: {exc}") from exc
    lam = float(evals[-1])
    c = evecs[:, -1]
    scale, _ = _normalise(domain, basis @ c, a)
    c = c * scale
    phi = CrackFunction(basis @ c, domain)
    iterations = None

    if refine:
        lam, phi_r, iterations = refine_eigenpair(phi, slopes, a)
        scale, _ = _normalise(domain, phi_r.values, a)
        phi = phi_r * scale
        v_phi = solve_v_phi(domain, phi, slopes)
    else:
        v_phi = PairField.from_arrays(domain, up @ c, lo @ c)
    residuals = auxil_residual(domain, slopes, lam, phi, v_phi * (1.0 / lam), a) if lam > 0 else {"max": math.inf}

    if cross_check:
        lam_p, _, iterations = power_iteration(phi, slopes, a)
        # the power iteration sees the whole grid space, the Ritz value only the basis
        if abs(lam_p - lam) > POWER_CHECK_RTOL * abs(lam):
            raise SolverError(f"power iteration gives {lam_p:.10g} but the eigenvalue is {lam:.10g}")
    return EigenReport(lam, phi, None, None, residuals["max"], Method.GRID_GALERKIN, basis_size,
                       tuple(float(e) for e in evals[::-1]), residuals, iterations)


def mode_matrix(length: float, half_height: float, slopes: SlopeConfig, n_modes: int):
    """Matrix of ``T`` in the orthonormal basis ``sqrt(2/l) sin(n pi x / l)`` of ``phi'``.

    Writing ``phi' = sum c_n e_n`` makes the ``~`` norm (``a = 0``) equal to
    ``|c|^2``.  Each mode solves the half problems in closed form, giving the
    diagonal ``t_n``; ``phi`` vanishing at both ends forces ``c`` orthogonal to
    the means of the ``e_n``, which only odd modes have.  The matrix is the
    compression ``P diag(t) P`` to that constraint.
    """
    n = np.arange(1, n_modes + 1)
    k = n * np.pi / length
    t = 2.0 * (slopes.alpha**2 + slopes.beta**2) * np.tanh(k * half_height) / k
    w = np.where(n % 2 == 1, 2.0 / k, 0.0) * math.sqrt(2.0 / length)
    w_hat = w / np.linalg.norm(w)
    P = np.eye(n_modes) - np.outer(w_hat, w_hat)
    return P @ np.diag(t) @ P, t, w_hat


def lambda1_modes(domain: CrackedRectangle, slopes: SlopeConfig, n_modes: int = 64) -> EigenReport:
    """``lambda1`` from the mode matrix, with ``a = 0``.

    The eigenfunction is integrated mode by mode and sampled on ``domain``.
    ``residual_strong`` is the residual of the truncated eigenproblem.
    """
    if n_modes < 8:
        raise OutOfRangeError(f"n_modes must be at least 8, got {n_modes}")
    length = domain.length
    M, _, _ = mode_matrix(length, domain.half_height, slopes, n_modes)
    M = 0.5 * (M + M.T)
    evals, evecs = np.linalg.eigh(M)
    lam = float(evals[-1])
    c = evecs[:, -1]
    resid = float(np.linalg.norm(M @ c - lam * c))

    n = np.arange(1, n_modes + 1)
    k = n * np.pi / length
    r = domain.x_interior - domain.x0
    primitives = math.sqrt(2.0 / length) * (1.0 - np.cos(np.outer(r, k))) / k
    values = primitives @ c
    scale, _ = _normalise(domain, values, None)
    phi = CrackFunction(values * scale, domain)
    return EigenReport(lam, phi, None, None, resid, Method.MODE_TRUNCATION, n_modes,
                       tuple(float(e) for e in evals[::-1]), {"max": resid})


def lambda1_analytic(domain: CrackedRectangle, slopes: SlopeConfig) -> EigenReport:
    """Closed-form ``lambda1`` with ``a = 0``, scaled by ``(alpha^2 + beta^2) / 2``.

    The eigenfunction ``cos(2 pi (x - x0)/l) - 1`` is sampled on ``domain``.
    """
    from crackstab.closedform import analytic_lambda1

    lam = 0.5 * (slopes.alpha**2 + slopes.beta**2) * analytic_lambda1(domain.length, domain.half_height)
    values = np.cos(2.0 * np.pi * (domain.x_interior - domain.x0) / domain.length) - 1.0
    scale, _ = _normalise(domain, values, None)
    return EigenReport(lam, CrackFunction(values * scale, domain), None, None, 0.0, Method.ANALYTIC, 0,
                       (lam,), {"max": 0.0})


# ---------------------------------------------------------------------------
# dual problem


def harmonic_half_basis(domain: CrackedRectangle, m: int) -> np.ndarray:
    """Local arrays ``sin(n pi x/l) sinh(n pi (y0 - s)/l) / sinh(n pi y0/l)``.

    Shape ``(ny, nx, m)``; every column vanishes on the outer boundary of the
    half and equals the crack sine on row 0.
    """
    n = np.arange(1, m + 1)
    k = n * np.pi / domain.length
    s = domain.s
    y0 = domain.half_height
    # sinh(k (y0 - s)) / sinh(k y0) without overflow
    prof = np.exp(-np.outer(s, k)) * (-np.expm1(-2.0 * np.outer(y0 - s, k))) / (-np.expm1(-2.0 * k * y0))
    sines = np.sin(np.outer(domain.reference_coordinate(domain.x) * np.pi, n))
    sines[[0, -1]] = 0.0
    return prof[:, None, :] * sines[None, :, :]


def dual_mu(domain: CrackedRectangle, slopes: SlopeConfig, a: CoefficientA | None = None,
            basis_size: int = 16) -> float:
    """Minimum of ``2 int |grad v|^2`` under ``|R(2 alpha d_x v^+ + 2 beta d_x v^-)|~ = 1``.

    The trial space holds ``basis_size`` separable harmonic profiles per
    side.  Writing ``C`` for the constraint Gram matrix and ``K`` for the
    energy one, ``1/mu`` is the largest eigenvalue of ``C x = s K x``.
    """
    a = _coefficient(a)
    if basis_size < 1:
        raise OutOfRangeError(f"basis_size must be positive, got {basis_size}")
    check_positive(domain, a)
    H = harmonic_half_basis(domain, basis_size)
    flat = H.reshape(-1, basis_size)
    stiff = assemble_stiffness(domain)
    E = flat.T @ (stiff @ flat)
    zero = np.zeros_like(E)
    K = 2.0 * np.block([[E, zero], [zero, E]])
    K = 0.5 * (K + K.T)

    traces = H[0, 1:-1, :]
    hx = domain.hx
    loads = np.hstack([
        hx * _crack_datum(domain, slopes, traces, np.zeros_like(traces)),
        hx * _crack_datum(domain, slopes, np.zeros_like(traces), traces),
    ])
    C = loads.T @ _resolve(domain, loads, a)
    C = 0.5 * (C + C.T)
    try:
        sig = sla.eigh(C, K, eigvals_only=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"dual eigensolver failed: {exc}") from exc
    top = float(sig[-1])
    if not top > 1e-14 * max(float(np.max(np.abs(np.diag(C)))), 1.0):
        raise SolverError("degenerate constraint: no trial field gives a nonzero resolvent image")
    return 1.0 / top


def energy_identity_gap(phi: CrackFunction, slopes: SlopeConfig, a: CoefficientA | None = None) -> float:
    """Relative gap between ``(T phi, phi)~`` and ``2 int |grad v_phi|^2``."""
    lhs = sim_inner(apply_T(phi, slopes, a), phi, a)
    rhs = 2.0 * dirichlet_energy(solve_v_phi(phi.domain, phi, slopes))
    return abs(lhs - rhs) / max(abs(rhs), np.finfo(float).tiny)

