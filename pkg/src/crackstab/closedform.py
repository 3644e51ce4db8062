"""Closed-form eigenvalues for the rectangle with unit slopes and ``a = 0``.

By symmetry the eigenfunctions of ``T`` split into modes that are even or odd
about the crack midpoint.  An even index ``n`` gives the eigenpair

    lambda_n = (4 l / (n pi)) tanh(n pi y0 / l),   phi_n = cos(n pi (x - x0)/l) - 1,

and the odd-index modes are coupled through the mean of the trace; their
eigenvalues are the roots of the series

    g(lambda) = sum_{n odd} n^-2 / ((4/n) tanh(n pi y0/l) - lambda pi / l).

The largest eigenvalue is ``lambda_2``; this module certifies numerically
that ``g`` has no root above it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
import scipy.optimize
import scipy.special

from crackstab.errors import OutOfRangeError, PoleProximityError

POLE_GUARD = 1e-9
TANH_CUTOFF = 20.0
INEQUALITY_RHS = math.pi**2 / 8.0 - 1.0


def _tanh(x: float) -> float:
    if x > TANH_CUTOFF:
        return 1.0
    return math.tanh(x)


def _check_positive(**kw) -> None:
    for name, v in kw.items():
        if not (isinstance(v, (int, float, np.floating, np.integer)) and math.isfinite(v) and v > 0):
            raise OutOfRangeError(f"{name} must be a positive finite number, got {v!r}")


def even_eigenvalue(length: float, half_height: float, n: int) -> float:
    """``(4 l / (n pi)) tanh(n pi y0 / l)``; for odd ``n`` this is the pole of the series."""
    _check_positive(length=length, half_height=half_height)
    return 4.0 * length / (n * math.pi) * _tanh(n * math.pi * half_height / length)


def analytic_lambda1(length: float, half_height: float) -> float:
    """``(2 l / pi) tanh(2 pi y0 / l)``."""
    return even_eigenvalue(length, half_height, 2)


def is_stable(length: float, half_height: float) -> bool:
    return analytic_lambda1(length, half_height) < 1.0


def threshold_length(half_height: float, xtol: float = 1e-14) -> float:
    """The length at which ``lambda1`` reaches 1, or ``inf`` if it never does.

    ``lambda1`` increases in ``l`` from 0 to its supremum ``4 y0``, so a threshold
    exists only for ``y0 > 1/4``.  Since ``lambda1(pi/2) = tanh(4 y0) < 1``,
    the root lies above ``pi/2``.
    """
    _check_positive(half_height=half_height)
    if 4.0 * half_height <= 1.0:
        return math.inf
    lo = math.pi / 2.0
    hi = 2.0 * lo
    while analytic_lambda1(hi, half_height) <= 1.0:
        hi *= 2.0
        if hi > 1e300:
            return math.inf
    f = lambda ell: analytic_lambda1(ell, half_height) - 1.0  # noqa: E731
    if not f(lo) < 0.0 < f(hi):
        raise OutOfRangeError(f"threshold bracket [{lo}, {hi}] does not change sign")
    return float(scipy.optimize.bisect(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=400))


# ---------------------------------------------------------------------------
# odd branch


def _odd_zeta3_tail(n_max: int) -> float:
    """``sum_{n odd > n_max} n^-3``."""
    odd = np.arange(1, n_max + 1, 2, dtype=float)
    return max(0.875 * float(scipy.special.zeta(3.0)) - float(np.sum(odd**-3.0)), 0.0)


def _odd_zeta2_tail(n_max: int) -> float:
    """``sum_{n odd > n_max} n^-2`` from ``sum_{n odd} n^-2 = pi^2 / 8``."""
    odd = np.arange(1, n_max + 1, 2, dtype=float)
    return max(math.pi**2 / 8.0 - float(np.sum(odd**-2.0)), 0.0)


@dataclass(frozen=True)
class SeriesValue:
    """``g(lambda)``: the sum up to ``n_max`` plus an estimate of the remainder.

    Beyond ``n_max`` each term is replaced by its limit ``-l/(lambda pi) n^-2``;
    ``tail_bound`` bounds the error of that replacement.
    """

    value: float
    partial: float
    tail_estimate: float
    tail_bound: float
    n_max: int

    def __float__(self) -> float:
        return self.value


def series_g(lam: float, length: float, half_height: float, n_max: int = 10_001) -> SeriesValue:
    """Left-hand side of the odd-branch equation at ``lambda``."""
    _check_positive(lam=lam, length=length, half_height=half_height)
    if n_max < 1:
        raise OutOfRangeError(f"n_max must be positive, got {n_max}")
    n = np.arange(1, n_max + 1, 2, dtype=float)
    x = np.pi * half_height / length
    tanh_nx = np.where(n * x > TANH_CUTOFF, 1.0, np.tanh(np.minimum(n * x, TANH_CUTOFF)))
    poles = 4.0 * length / (n * np.pi) * tanh_nx
    near = np.flatnonzero(np.abs(poles - lam) < POLE_GUARD)
    if near.size:
        i = int(near[0])
        raise PoleProximityError(int(n[i]), float(poles[i]), float(lam))
    c = lam * math.pi / length
    partial = float(np.sum(1.0 / (n * n * (4.0 / n * tanh_nx - c))))
    n_last = int(n[-1])
    tail_estimate = -_odd_zeta2_tail(n_last) / c
    next_n = n_last + 2
    if 4.0 / next_n < c:
        tail_bound = 4.0 / (c * (c - 4.0 / next_n)) * _odd_zeta3_tail(n_last)
    else:
        tail_bound = math.inf
    return SeriesValue(partial + tail_estimate, partial, tail_estimate, tail_bound, n_last)


@dataclass(frozen=True)
class NoRootReport:
    """Numerical replay of the argument that the odd branch stays below ``lambda_2``."""

    length: float
    half_height: float
    lambda1: float
    pole1: float
    g_at_lambda1: float
    g_at_lambda1_bound: float
    nondecreasing: bool
    negative_above_pole: bool
    verdict: str
    samples: tuple = field(default=(), repr=False)

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"


def no_root_check(length: float, half_height: float, n_samples: int = 64, n_max: int = 10_001) -> NoRootReport:
    """Check that ``g`` has no root in ``[lambda_2, inf)``.

    On ``[lambda_2, pole_1)`` it suffices that ``g(lambda_2) > 0`` and that
    ``g`` does not decrease; above the first pole every term is negative.
    Sample points within ``POLE_GUARD`` of a pole are skipped.
    """
    _check_positive(length=length, half_height=half_height)
    lam1 = analytic_lambda1(length, half_height)
    pole1 = even_eigenvalue(length, half_height, 1)
    g1 = series_g(lam1, length, half_height, n_max)

    # geometric clustering towards the pole, where g blows up
    frac = 1.0 - np.geomspace(1.0, 1e-6, n_samples)
    lams = lam1 + (pole1 - lam1) * frac
    samples = []
    for lam in lams:
        if abs(lam - pole1) < POLE_GUARD:
            continue
        samples.append((float(lam), series_g(float(lam), length, half_height, n_max).value))
    values = [v for _, v in samples]
    nondecreasing = bool(all(b >= a for a, b in zip(values, values[1:])))

    # above the first pole: (4/n) tanh(n x) <= 4 tanh(x) makes every denominator negative
    n = np.arange(1, n_max + 1, 2, dtype=float)
    x = math.pi * half_height / length
    scaled = 4.0 / n * np.tanh(np.minimum(n * x, TANH_CUTOFF))
    above = pole1 * np.array([1.0 + 1e-6, 1.01, 1.5, 2.0, 10.0, 1e3])
    negative = bool(all(np.all(scaled - lam * math.pi / length < 0) for lam in above))

    ok = g1.value - g1.tail_bound > 0 and nondecreasing and negative
    return NoRootReport(length, half_height, lam1, pole1, g1.value, g1.tail_bound, nondecreasing,
                        negative, "PASS" if ok else "FAIL", tuple(samples))


@dataclass(frozen=True)
class InequalityWitness:
    """Both sides of the tanh inequality at ``x = pi y0 / l``.

    ``identity_gap`` is the difference between the closed form of the left
    side and its definition as a ratio of tanh values.
    """

    x: float
    lhs: float
    rhs: float
    ok: bool
    identity_gap: float

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.ok))


def tanh_ratio(x: float, dps: int = 60) -> float:
    """``(tanh(2x)/2 - tanh(3x)/3) / (tanh(x) - tanh(2x)/2)`` in extended precision."""
    with mpmath.workdps(dps):
        xm = mpmath.mpf(x)
        num = mpmath.tanh(2 * xm) / 2 - mpmath.tanh(3 * xm) / 3
        den = mpmath.tanh(xm) - mpmath.tanh(2 * xm) / 2
        return float(num / den)


def inequality_witness(x: float) -> InequalityWitness:
    """``(5 - tanh^2 x) / (3 (1 + 3 tanh^2 x))`` against ``pi^2/8 - 1``."""
    _check_positive(x=x)
    t2 = _tanh(x) ** 2
    lhs = (5.0 - t2) / (3.0 * (1.0 + 3.0 * t2))
    other = tanh_ratio(x)
    gap = abs(lhs - other)
    return InequalityWitness(float(x), lhs, INEQUALITY_RHS, bool(lhs > INEQUALITY_RHS and gap <= 1e-10), gap)


# ---------------------------------------------------------------------------
# even branch


@dataclass(frozen=True)
class ExactEigenpair:
    """Eigenvalue, crack function and bulk field of an even-index mode.

    ``v_upper`` and ``v_lower`` solve the strong eigen-system with ``v``
    normalised as ``v_phi / lambda``; the field is symmetric about the crack.
    """

    n: int
    lam: float
    length: float
    half_height: float
    x0: float

    @property
    def k(self) -> float:
        return self.n * math.pi / self.length

    def phi(self, x):
        return np.cos(self.k * (np.asarray(x, dtype=float) - self.x0)) - 1.0

    def _profile(self, s):
        # sinh(k (y0 - s)) / cosh(k y0), evaluated without overflow
        k, y0 = self.k, self.half_height
        s = np.asarray(s, dtype=float)
        return np.exp(-k * s) * (-np.expm1(-2.0 * k * (y0 - s))) / (1.0 + np.exp(-2.0 * k * y0))

    def v_upper(self, x, y):
        return np.sin(self.k * (np.asarray(x, dtype=float) - self.x0)) * self._profile(y) / self.lam

    def v_lower(self, x, y):
        return self.v_upper(x, -np.asarray(y, dtype=float))

    def sample(self, domain):
        """Nodal ``(phi, v)`` on a grid over the same rectangle."""
        from crackstab.elliptic import PairField
        from crackstab.geometry import CrackFunction

        phi = CrackFunction.from_callable(domain, self.phi)
        return phi, PairField.sample(domain, self.v_upper, self.v_lower)


def exact_eigenpair(length: float, half_height: float, n: int, x0: float = 0.0) -> ExactEigenpair:
    """Closed-form eigenpair for an even index ``n >= 2``."""
    if int(n) != n or n < 2 or n % 2:
        raise OutOfRangeError(f"closed-form eigenpairs exist only for even n >= 2, got {n!r}")
    lam = even_eigenvalue(length, half_height, int(n))
    return ExactEigenpair(int(n), lam, float(length), float(half_height), float(x0))
