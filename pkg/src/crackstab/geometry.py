"""Cracked rectangle, crack functions, normal flows and their pullback metric.

The rectangle ``U = (x0, x0 + l) x (-y0, y0)`` is covered by two
vertex-centred half grids with ``nx`` columns and ``ny`` rows each.  Row 0 of
both half grids lies on the crack ``y = 0``; the crack nodes are therefore
stored twice (once per side) at identical positions.

A normal perturbation of the crack is the flow

    Phi_t(x, y) = (x, y + t phi(x) chi(y)),

with ``chi`` a quartic cut-off supported in ``|y| < d``.  Energies on the
perturbed domain are evaluated on the fixed grid through the pullback metric
``A_t = (DPhi_t)^-1 (DPhi_t)^-T det DPhi_t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from crackstab.errors import OutOfRangeError

TMAX_SAFETY = 0.9


@dataclass(frozen=True)
class CrackedRectangle:
    """The rectangle ``(x0, x0 + length) x (-half_height, half_height)``.

    ``nx`` is the number of nodes along the crack (endpoints included) and
    ``ny`` the number of rows in each half, crack row and outer edge included.
    """

    length: float
    half_height: float
    x0: float = 0.0
    nx: int = 129
    ny: int = 129

    def __post_init__(self):
        if not (math.isfinite(self.length) and self.length > 0):
            raise OutOfRangeError(f"length must be positive, got {self.length!r}")
        if not (math.isfinite(self.half_height) and self.half_height > 0):
            raise OutOfRangeError(f"half_height must be positive, got {self.half_height!r}")
        if not math.isfinite(self.x0):
            raise OutOfRangeError(f"x0 must be finite, got {self.x0!r}")
        if int(self.nx) != self.nx or self.nx < 8:
            raise OutOfRangeError(f"nx must be an integer >= 8, got {self.nx!r}")
        if int(self.ny) != self.ny or self.ny < 8:
            raise OutOfRangeError(f"ny must be an integer >= 8, got {self.ny!r}")

    @property
    def hx(self) -> float:
        return self.length / (self.nx - 1)

    @property
    def hy(self) -> float:
        return self.half_height / (self.ny - 1)

    @property
    def x(self) -> np.ndarray:
        """Crack abscissae, endpoints included."""
        return self.x0 + self.hx * np.arange(self.nx)

    @property
    def x_interior(self) -> np.ndarray:
        return self.x[1:-1]

    @property
    def s(self) -> np.ndarray:
        """Distance from the crack of the rows of a half grid."""
        return self.hy * np.arange(self.ny)

    @property
    def crack_weights(self) -> np.ndarray:
        """Composite trapezoid weights on the crack nodes."""
        w = np.full(self.nx, self.hx)
        w[0] = w[-1] = 0.5 * self.hx
        return w

    def scaled(self, s: float) -> "CrackedRectangle":
        """Same grid on the rectangle dilated by ``s`` about ``(x0, 0)``."""
        return CrackedRectangle(self.length * s, self.half_height * s, self.x0 * s, self.nx, self.ny)

    def reference_coordinate(self, x):
        """Map ``x`` to ``(x - x0) / length`` in [0, 1]."""
        return (np.asarray(x) - self.x0) / self.length


@dataclass(frozen=True, eq=False)
class CrackFunction:
    """A discrete element of H^1_0 of the crack.

    Only the ``nx - 2`` interior values are stored; both endpoint values are
    zero by construction.
    """

    values: np.ndarray
    domain: CrackedRectangle

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).copy()
        if v.shape != (self.domain.nx - 2,):
            raise OutOfRangeError(
                f"expected {self.domain.nx - 2} interior values, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise OutOfRangeError("crack function values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_nodes(cls, domain: CrackedRectangle, nodal, tol: float = 1e-12) -> "CrackFunction":
        """Build from all ``nx`` nodal values; the endpoints must vanish."""
        nodal = np.asarray(nodal, dtype=float)
        if nodal.shape != (domain.nx,):
            raise OutOfRangeError(f"expected {domain.nx} nodal values, got shape {nodal.shape}")
        scale = max(1.0, float(np.max(np.abs(nodal))))
        if abs(nodal[0]) > tol * scale or abs(nodal[-1]) > tol * scale:
            raise OutOfRangeError(
                f"crack function must vanish at both endpoints, got {nodal[0]!r} and {nodal[-1]!r}"
            )
        return cls(nodal[1:-1], domain)

    @classmethod
    def from_callable(cls, domain: CrackedRectangle, f) -> "CrackFunction":
        """Sample ``f`` at the interior crack nodes."""
        return cls(np.asarray(f(domain.x_interior), dtype=float), domain)

    @classmethod
    def zero(cls, domain: CrackedRectangle) -> "CrackFunction":
        return cls(np.zeros(domain.nx - 2), domain)

    @property
    def nodal(self) -> np.ndarray:
        """All ``nx`` nodal values, zeros at the endpoints."""
        out = np.zeros(self.domain.nx)
        out[1:-1] = self.values
        return out

    def __add__(self, other: "CrackFunction") -> "CrackFunction":
        return CrackFunction(self.values + other.values, self.domain)

    def __sub__(self, other: "CrackFunction") -> "CrackFunction":
        return CrackFunction(self.values - other.values, self.domain)

    def __mul__(self, c: float) -> "CrackFunction":
        return CrackFunction(c * self.values, self.domain)

    __rmul__ = __mul__

    def __neg__(self) -> "CrackFunction":
        return CrackFunction(-self.values, self.domain)


def sine_mode(domain: CrackedRectangle, k: int) -> CrackFunction:
    """``sin(k pi (x - x0) / l)`` sampled on the crack."""
    return CrackFunction.from_callable(
        domain, lambda x: np.sin(k * np.pi * domain.reference_coordinate(x))
    )


def cosine_bump(domain: CrackedRectangle, k: int) -> CrackFunction:
    """``cos(k pi (x - x0) / l) - 1`` for even ``k`` (vanishes at both ends)."""
    if k < 2 or k % 2:
        raise OutOfRangeError(f"cos(k pi x / l) - 1 vanishes at both endpoints only for even k >= 2, got {k}")
    return CrackFunction.from_callable(
        domain, lambda x: np.cos(k * np.pi * domain.reference_coordinate(x)) - 1.0
    )


def nodal_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Central differences inside, second-order one-sided at the ends."""
    return np.gradient(np.asarray(values, dtype=float), h, edge_order=2)


def nodal_second_derivative(values: np.ndarray, h: float) -> np.ndarray:
    f = np.asarray(values, dtype=float)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h**2
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h**2
    out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / h**2
    return out


def cutoff(y, d: float) -> np.ndarray:
    """Quartic cut-off ``(1 - (y/d)^2)^2`` on ``|y| < d``, zero elsewhere."""
    r = np.asarray(y, dtype=float) / d
    return np.where(np.abs(r) < 1.0, (1.0 - r * r) ** 2, 0.0)


def cutoff_derivative(y, d: float) -> np.ndarray:
    r = np.asarray(y, dtype=float) / d
    return np.where(np.abs(r) < 1.0, -4.0 * r * (1.0 - r * r) / d, 0.0)


@dataclass(frozen=True, eq=False)
class Flow:
    """The normal flow ``Phi_t(x, y) = (x, y + t phi(x) chi(y))``.

    The flow is affine in ``t``, so its acceleration vanishes, and its
    velocity ``(0, phi chi)`` is normal to the crack.  ``t_max`` is the
    largest ``|t|`` for which the flow is used; it is ``inf`` for ``phi = 0``.
    """

    phi: CrackFunction
    cutoff_width: float
    t_max: float
    phi_prime: np.ndarray = field(repr=False)

    @property
    def domain(self) -> CrackedRectangle:
        return self.phi.domain

    def check_time(self, t: float) -> None:
        if not abs(t) <= self.t_max:
            raise OutOfRangeError(f"|t|={abs(t)!r} exceeds t_max={self.t_max!r}")

    def chi(self, y):
        return cutoff(y, self.cutoff_width)

    def chi_prime(self, y):
        return cutoff_derivative(y, self.cutoff_width)

    def map(self, t: float, x, y):
        """Image of the points ``(x, y)``; ``x`` must be crack node abscissae."""
        self.check_time(t)
        phi = np.interp(x, self.domain.x, self.phi.nodal)
        return np.asarray(x, dtype=float), np.asarray(y, dtype=float) + t * phi * self.chi(y)

    def jacobian_determinant(self, t: float) -> np.ndarray:
        """``det DPhi_t = 1 + t phi chi'`` on the full grid, rows from y = -y0 to y0."""
        self.check_time(t)
        y = full_rows(self.domain)
        return 1.0 + t * self.phi.nodal[None, :] * self.chi_prime(y)[:, None]


def full_rows(domain: CrackedRectangle) -> np.ndarray:
    """Ordinates of the ``2 ny - 1`` rows of the whole rectangle, bottom to top."""
    s = domain.s
    return np.concatenate([-s[:0:-1], s])


def build_flow(domain: CrackedRectangle, phi, d: float) -> Flow:
    """Normal flow generated by ``phi`` with a cut-off of half-width ``d``."""
    if not (0.0 < d < domain.half_height):
        raise OutOfRangeError(f"cut-off width must lie in (0, {domain.half_height}), got {d!r}")
    if not isinstance(phi, CrackFunction):
        phi = CrackFunction.from_nodes(domain, phi)
    if phi.domain != domain:
        raise OutOfRangeError("phi is defined on a different rectangle")
    bound = float(np.max(np.abs(phi.values), initial=0.0)) * float(
        np.max(np.abs(cutoff_derivative(domain.s, d)))
    )
    t_max = math.inf if bound == 0.0 else TMAX_SAFETY / bound
    return Flow(phi, float(d), t_max, nodal_derivative(phi.nodal, domain.hx))


@dataclass(frozen=True, eq=False)
class PullbackMetric:
    """Nodal field of ``A_t`` on the ``(2 ny - 1) x nx`` full grid.

    ``entries`` has shape ``(3, 2 ny - 1, nx)`` holding ``A11, A12, A22`` in
    global coordinates, rows ordered from ``y = -y0`` to ``y = y0``.
    """

    t: float
    entries: np.ndarray
    domain: CrackedRectangle

    @classmethod
    def identity(cls, domain: CrackedRectangle) -> "PullbackMetric":
        shape = (2 * domain.ny - 1, domain.nx)
        return cls(0.0, np.stack([np.ones(shape), np.zeros(shape), np.ones(shape)]), domain)

    @property
    def A(self) -> np.ndarray:
        """The metric as an array of 2x2 matrices, shape ``(2 ny - 1, nx, 2, 2)``."""
        a11, a12, a22 = self.entries
        return np.stack([np.stack([a11, a12], -1), np.stack([a12, a22], -1)], -2)

    def is_identity(self) -> bool:
        a11, a12, a22 = self.entries
        return bool(np.all(a11 == 1.0) and np.all(a12 == 0.0) and np.all(a22 == 1.0))

    def local(self, upper: bool) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Nodal entries of one half in local coordinates ``(x, s)``.

        Row 0 is the crack and ``s = |y|``; on the lower half the reflection
        ``s = -y`` flips the sign of the off-diagonal entry.
        """
        ny = self.domain.ny
        a11, a12, a22 = self.entries
        if upper:
            return a11[ny - 1:], a12[ny - 1:], a22[ny - 1:]
        return a11[ny - 1::-1], -a12[ny - 1::-1], a22[ny - 1::-1]


def pullback_metric(flow: Flow, t: float) -> PullbackMetric:
    """``A_t`` from ``DPhi_t = [[1, 0], [t phi' chi, 1 + t phi chi']]``."""
    flow.check_time(t)
    domain = flow.domain
    y = full_rows(domain)
    chi = flow.chi(y)[:, None]
    dchi = flow.chi_prime(y)[:, None]
    p = t * flow.phi_prime[None, :] * chi
    q = 1.0 + t * flow.phi.nodal[None, :] * dchi
    # (DPhi)^-1 (DPhi)^-T det DPhi for the lower-triangular Jacobian above
    entries = np.stack([q, -p, (1.0 + p * p) / q])
    return PullbackMetric(float(t), entries, domain)


def crack_length(flow: Flow, t: float) -> float:
    """Length of the perturbed crack ``{y = t phi(x)}`` by the trapezoid rule."""
    flow.check_time(t)
    integrand = np.sqrt(1.0 + (t * flow.phi_prime) ** 2)
    return float(np.dot(flow.domain.crack_weights, integrand))


def graph_mean_curvature(flow: Flow, t: float) -> np.ndarray:
    """Curvature ``div nu_t`` of the graph ``y = t phi(x)`` at the crack nodes.

    The normal is ``nu_t = (-t phi', 1) / sqrt(1 + t^2 phi'^2)``, which gives
    ``H_t = -t phi'' / (1 + t^2 phi'^2)^(3/2)``.
    """
    flow.check_time(t)
    h = flow.domain.hx
    d2 = nodal_second_derivative(flow.phi.nodal, h)
    return -t * d2 / (1.0 + (t * flow.phi_prime) ** 2) ** 1.5


def crack_gradient_product(phi: np.ndarray, psi: np.ndarray, h: float) -> float:
    """``int phi' psi'`` for the piecewise-linear interpolants of nodal data."""
    return float(np.dot(np.diff(phi), np.diff(psi)) / h)


def central_difference(values: np.ndarray, h: float) -> np.ndarray:
    """Central differences at the interior nodes of full nodal data.

    Accepts a trailing axis of several data sets.
    """
    f = np.asarray(values, dtype=float)
    return (f[2:] - f[:-2]) / (2.0 * h)
