"""Second variation of the energy at a flat crack, and a finite-difference harness.

For a normal flow with velocity ``phi`` on the crack, the second variation
at a critical pair reduces to

    Q(phi) = -2 int_U |grad v_phi|^2 + int_G (|phi'|^2 + a phi^2),

where ``v_phi`` vanishes on the outer boundary, is harmonic on each side and
has conormal data ``alpha phi'`` above and ``-beta phi'`` below the crack.
The bulk term is evaluated as an energy rather than as a crack integral of
``v dv/dnu``; the two agree by testing the equation with ``v_phi`` itself.

The harness ``fd_energy_derivatives`` differentiates the full energy along
the flow numerically and is independent of this reduction.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from crackstab.elliptic import (
    Half,
    PairField,
    SlopeConfig,
    dirichlet_energy,
    solve_half,
    solve_neumann_many,
    solve_state,
)
from crackstab.errors import OutOfRangeError
from crackstab.geometry import (
    CrackedRectangle,
    CrackFunction,
    Flow,
    build_flow,
    central_difference,
    crack_gradient_product,
    crack_length,
    pullback_metric,
)

# Terms of the general second-variation formula that vanish identically for
# normal flows through a flat crack with zero acceleration.
REDUCTIONS = {
    "tangential_field": "X parallel to the crack is zero for normal flows",
    "acceleration": "Z = 0 because the flow is affine in t",
    "curvature": "H = 0 and B = 0 on the straight crack",
    "transmission": "the f-term drops out at t = 0 since X.nu = phi and Z = 0",
}


@dataclass(frozen=True)
class CoefficientA:
    """Zeroth-order coefficient ``a`` of the crack inner product.

    Either the tag ``zero``, a constant, or nodal values at all ``nx`` crack
    nodes.  Only interior values ever enter the discrete forms.
    """

    kind: str = "zero"
    constant_value: float = 0.0
    values: tuple | None = None

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "values"):
            raise OutOfRangeError(f"unknown coefficient kind {self.kind!r}")
        if not math.isfinite(self.constant_value):
            raise OutOfRangeError("coefficient a must be bounded")
        if self.kind == "values":
            if self.values is None or not np.all(np.isfinite(self.values)):
                raise OutOfRangeError("coefficient a must be given by finite nodal values")

    @classmethod
    def zero(cls) -> "CoefficientA":
        return cls()

    @classmethod
    def constant(cls, c: float) -> "CoefficientA":
        return cls("constant", float(c))

    @classmethod
    def from_values(cls, values) -> "CoefficientA":
        return cls("values", 0.0, tuple(float(v) for v in np.ravel(values)))

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.kind == "constant" and self.constant_value == 0.0)

    def on(self, domain: CrackedRectangle) -> np.ndarray:
        """Values at the ``nx - 2`` interior crack nodes."""
        if self.kind == "values":
            v = np.asarray(self.values, dtype=float)
            if v.shape != (domain.nx,):
                raise OutOfRangeError(f"coefficient a has {v.size} values but the crack has {domain.nx} nodes")
            return v[1:-1]
        return np.full(domain.nx - 2, self.constant_value)

    def describe(self) -> str:
        if self.kind == "values":
            return f"values[{len(self.values)}]"
        if self.kind == "constant":
            return f"const:{self.constant_value!r}"
        return "zero"


def _coefficient(a) -> CoefficientA:
    return CoefficientA.zero() if a is None else a


def _check_phi(domain: CrackedRectangle, phi: CrackFunction) -> None:
    if phi.domain != domain:
        raise OutOfRangeError("phi is defined on a different rectangle")


def pad_endpoints(phi_values: np.ndarray) -> np.ndarray:
    """Interior values padded with the two zero endpoint values; accepts columns."""
    v = np.asarray(phi_values, dtype=float)
    padded = np.zeros((v.shape[0] + 2,) + v.shape[1:])
    padded[1:-1] = v
    return padded


def v_phi_neumann(domain: CrackedRectangle, phi_values: np.ndarray, slopes: SlopeConfig):
    """Crack data ``(alpha phi', -beta phi')`` at the interior nodes."""
    dphi = central_difference(pad_endpoints(phi_values), domain.hx)
    return slopes.alpha * dphi, -slopes.beta * dphi


def solve_v_phi(domain: CrackedRectangle, phi: CrackFunction, slopes: SlopeConfig) -> PairField:
    """Solution ``v_phi`` with zero outer values and conormal data ``+-slope * phi'``."""
    _check_phi(domain, phi)
    g_up, g_lo = v_phi_neumann(domain, phi.values, slopes)
    return PairField(solve_half(domain, Half.UPPER, neumann=g_up),
                     solve_half(domain, Half.LOWER, neumann=g_lo))


def solve_v_phi_many(domain: CrackedRectangle, phis: np.ndarray, slopes: SlopeConfig):
    """Batched ``v_phi`` for the columns of ``phis`` (shape ``(nx - 2, k)``).

    Returns the upper and lower local arrays, each of shape ``(ny, nx, k)``.
    """
    g_up, g_lo = v_phi_neumann(domain, phis, slopes)
    return solve_neumann_many(domain, Half.UPPER, g_up), solve_neumann_many(domain, Half.LOWER, g_lo)


def crack_form(domain: CrackedRectangle, phi: np.ndarray, psi: np.ndarray, a=None) -> tuple[float, float]:
    """Gradient and zeroth-order parts of ``int phi' psi' + a phi psi``.

    Arguments are interior values; the gradient part uses piecewise-linear
    interpolants and the zeroth-order part the trapezoid rule.
    """
    a_int = _coefficient(a).on(domain)
    p, q = pad_endpoints(phi), pad_endpoints(psi)
    grad = crack_gradient_product(p, q, domain.hx)
    zeroth = float(domain.hx * np.dot(a_int * np.asarray(phi, float), np.asarray(psi, float)))
    return grad, zeroth


@dataclass(frozen=True)
class SecondVariationReport:
    """Term-by-term value of the quadratic form at one ``phi``."""

    boundary_term: float
    gradient_term: float
    a_term: float
    total: float
    fd_second: float | None = None
    fd_first: float | None = None
    params: dict = field(default_factory=dict)
    reductions: dict = field(default_factory=lambda: dict(REDUCTIONS))


def quadratic_form(domain: CrackedRectangle, phi: CrackFunction, slopes: SlopeConfig,
                   a: CoefficientA | None = None, params: dict | None = None) -> SecondVariationReport:
    """Evaluate ``Q(phi)`` with the bulk term taken as ``-2 E(v_phi)``."""
    _check_phi(domain, phi)
    v = solve_v_phi(domain, phi, slopes)
    boundary = -2.0 * dirichlet_energy(v)
    grad, zeroth = crack_form(domain, phi.values, phi.values, a)
    echo = {
        "length": domain.length, "height": domain.half_height, "x0": domain.x0,
        "nx": domain.nx, "ny": domain.ny, "alpha": slopes.alpha, "beta": slopes.beta,
        "a": _coefficient(a).describe(),
    }
    echo.update(params or {})
    return SecondVariationReport(boundary, grad, zeroth, boundary + grad + zeroth, params=echo)


def first_variation(domain: CrackedRectangle, phi: CrackFunction, slopes: SlopeConfig) -> float:
    """``(beta^2 - alpha^2) int phi`` by the trapezoid rule.

    On the flat crack the curvature vanishes and the jump of the energy
    density is constant, so this is the whole first variation.
    """
    _check_phi(domain, phi)
    return float(slopes.jump_coefficient * np.dot(domain.crack_weights, phi.nodal))


# ---------------------------------------------------------------------------
# finite differences of the full energy


def energy_along_flow(domain: CrackedRectangle, flow: Flow, slopes: SlopeConfig, t: float) -> float:
    """``g(t)``: bulk energy of the pulled-back state plus the crack length."""
    state = solve_state(domain, flow, t, slopes)
    return dirichlet_energy(state, pullback_metric(flow, t)) + crack_length(flow, t)


@dataclass(frozen=True)
class FDDerivatives:
    """Central differences of ``g`` at ``t = 0`` with step ``h``."""

    g0: float
    g1: float
    g2: float
    h: float

    def __iter__(self):
        return iter((self.g0, self.g1, self.g2))


def fd_energy_derivatives(domain: CrackedRectangle, flow: Flow, slopes: SlopeConfig, h: float,
                          g0: float | None = None) -> FDDerivatives:
    """Three-point first and second differences of ``g`` at ``t = 0``."""
    if not (h > 0 and math.isfinite(h)):
        raise OutOfRangeError(f"step must be positive, got {h!r}")
    if h > flow.t_max / 4:
        raise OutOfRangeError(f"step {h!r} exceeds t_max/4 = {flow.t_max / 4!r}")
    if g0 is None:
        g0 = energy_along_flow(domain, flow, slopes, 0.0)
    gp = energy_along_flow(domain, flow, slopes, h)
    gm = energy_along_flow(domain, flow, slopes, -h)
    return FDDerivatives(g0, (gp - gm) / (2.0 * h), (gp - 2.0 * g0 + gm) / h**2, h)


@dataclass(frozen=True)
class RichardsonEstimate:
    g0: float
    g1: float
    g2: float
    coarse: FDDerivatives
    fine: FDDerivatives


def fd_richardson(domain: CrackedRectangle, flow: Flow, slopes: SlopeConfig, h: float) -> RichardsonEstimate:
    """Combine steps ``h`` and ``h/2`` to cancel the ``O(h^2)`` error."""
    coarse = fd_energy_derivatives(domain, flow, slopes, h)
    fine = fd_energy_derivatives(domain, flow, slopes, h / 2, g0=coarse.g0)
    return RichardsonEstimate(
        coarse.g0,
        (4.0 * fine.g1 - coarse.g1) / 3.0,
        (4.0 * fine.g2 - coarse.g2) / 3.0,
        coarse,
        fine,
    )


FD_G1_ABS_TOL = 1e-6
FD_G1_REL_TOL = 1e-2
FD_G2_REL_TOL = 2e-2
DEFAULT_STEP_FRACTION = 1e-3


@dataclass(frozen=True)
class FDCheckReport:
    """Richardson derivatives of the energy against the analytic variations.

    At a critical pair ``g1`` must vanish to ``FD_G1_ABS_TOL``; otherwise it
    must match ``first_variation`` to ``FD_G1_REL_TOL``.  ``g2`` must match
    the quadratic form to ``FD_G2_REL_TOL``.
    """

    g0: float
    g1: float
    g2: float
    first_variation: float
    second_variation: float
    g1_error: float
    g2_rel_error: float
    h: float
    t_max: float
    cutoff_width: float
    passed: bool
    params: dict = field(default_factory=dict)


def fd_check(domain: CrackedRectangle, phi: CrackFunction, slopes: SlopeConfig, h: float | None = None,
             cutoff_width: float | None = None) -> FDCheckReport:
    """Compare ``fd_richardson`` with ``first_variation`` and ``quadratic_form``.

    ``h`` defaults to ``DEFAULT_STEP_FRACTION * t_max`` and the cut-off to
    half the rectangle height.  For an off-critical pair the quadratic form
    is still evaluated as a reference although it is no longer the full
    second derivative.
    """
    _check_phi(domain, phi)
    d = 0.5 * domain.half_height if cutoff_width is None else cutoff_width
    flow = build_flow(domain, phi, d)
    if not math.isfinite(flow.t_max):
        raise OutOfRangeError("phi vanishes identically; there is nothing to differentiate")
    step = DEFAULT_STEP_FRACTION * flow.t_max if h is None else h
    rich = fd_richardson(domain, flow, slopes, step)
    dF = first_variation(domain, phi, slopes)
    q = quadratic_form(domain, phi, slopes).total
    if slopes.critical:
        g1_err = abs(rich.g1)
        g1_ok = g1_err <= FD_G1_ABS_TOL
    else:
        g1_err = abs(rich.g1 - dF) / abs(dF) if dF != 0 else abs(rich.g1)
        g1_ok = g1_err <= FD_G1_REL_TOL
    g2_err = abs(rich.g2 - q) / abs(q) if q != 0 else abs(rich.g2)
    passed = bool(g1_ok and g2_err <= FD_G2_REL_TOL)
    params = {"length": domain.length, "height": domain.half_height, "x0": domain.x0,
              "nx": domain.nx, "ny": domain.ny, "alpha": slopes.alpha, "beta": slopes.beta}
    return FDCheckReport(rich.g0, rich.g1, rich.g2, dF, q, float(g1_err), float(g2_err), float(step),
                         float(flow.t_max), float(d), passed, params)


# ---------------------------------------------------------------------------
# classification


class Classification(enum.Enum):
    POSITIVE_DEFINITE = "PositiveDefinite"
    DEGENERATE = "Degenerate"
    INDEFINITE = "Indefinite"

    @property
    def label(self) -> str:
        return {
            Classification.POSITIVE_DEFINITE: "isolated C² local minimizer",
            Classification.INDEFINITE: "not a minimizer",
            Classification.DEGENERATE: "inconclusive",
        }[self]


DEFAULT_CLASSIFY_TOL = {"analytic": 1e-12, "modes": 1e-10, "grid": 1e-2}


@dataclass(frozen=True)
class ClassificationReport:
    classification: Classification
    label: str
    lambda1: float
    method: str
    tol: float
    witness_total: float | None = None
    witness: CrackFunction | None = field(default=None, repr=False)


def classify(domain: CrackedRectangle, slopes: SlopeConfig, a: CoefficientA | None = None,
             method: str = "grid", tol: float | None = None, basis_size: int = 32,
             n_modes: int = 64) -> ClassificationReport:
    """Sign of the second variation from ``lambda1`` compared with 1.

    When the form is indefinite, the leading eigenfunction is returned as a
    witness along with its (negative) value of ``Q``.
    """
    from crackstab import closedform, spectral

    if not slopes.critical:
        raise OutOfRangeError("classification requires a critical pair (alpha == beta)")
    if method not in DEFAULT_CLASSIFY_TOL:
        raise OutOfRangeError(f"unknown method {method!r}")
    a = _coefficient(a)
    if method != "grid" and not a.is_zero:
        raise OutOfRangeError(f"method {method!r} supports only a = zero")
    tol = DEFAULT_CLASSIFY_TOL[method] if tol is None else tol

    if method == "analytic":
        lam = slopes.alpha**2 * closedform.analytic_lambda1(domain.length, domain.half_height)
        eigenfunction = None
    else:
        if method == "modes":
            report = spectral.lambda1_modes(domain, slopes, n_modes)
        else:
            report = spectral.lambda1_grid(domain, slopes, a, basis_size)
        lam, eigenfunction = report.lambda1, report.eigenfunction

    if lam < 1.0 - tol:
        cls = Classification.POSITIVE_DEFINITE
    elif lam > 1.0 + tol:
        cls = Classification.INDEFINITE
    else:
        cls = Classification.DEGENERATE

    witness_total = None
    witness = None
    if cls is Classification.INDEFINITE:
        if eigenfunction is None:
            eigenfunction = CrackFunction.from_callable(
                domain, lambda x: np.cos(2 * np.pi * domain.reference_coordinate(x)) - 1.0)
        witness = eigenfunction
        witness_total = quadratic_form(domain, eigenfunction, slopes, a).total
    return ClassificationReport(cls, cls.label, float(lam), method, float(tol), witness_total, witness)
