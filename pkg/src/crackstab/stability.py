"""Parameter scans of ``lambda1``: monotonicity, thin rectangles, small supports, scaling.

All tables are lists of frozen row dataclasses sorted by their parameters,
so output does not depend on the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields

import numpy as np

from crackstab.closedform import analytic_lambda1, threshold_length
from crackstab.elliptic import SlopeConfig
from crackstab.errors import OutOfRangeError
from crackstab.geometry import CrackedRectangle
from crackstab.spectral import lambda1_grid, lambda1_modes

METHODS = ("analytic", "grid", "modes")


@dataclass(frozen=True)
class ScanConfig:
    """Resolution used by the numerical methods of a scan.

    With ``spacing`` set, every rectangle gets nodes ``spacing`` apart in
    both directions instead of the fixed ``nx`` and ``ny``.  Rectangles whose
    sides are multiples of ``spacing`` then carry nested grids, for which the
    discrete ``lambda1`` is exactly monotone under inclusion.
    """

    method: str = "analytic"
    nx: int = 257
    ny: int = 257
    basis_size: int = 24
    n_modes: int = 64
    x0: float = 0.0
    workers: int = 1
    spacing: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise OutOfRangeError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.workers < 1:
            raise OutOfRangeError(f"workers must be positive, got {self.workers}")
        if self.spacing is not None and not self.spacing > 0:
            raise OutOfRangeError(f"spacing must be positive, got {self.spacing!r}")

    def domain(self, length: float, half_height: float) -> CrackedRectangle:
        if self.spacing is None:
            return CrackedRectangle(length, half_height, self.x0, self.nx, self.ny)
        nx = int(round(length / self.spacing)) + 1
        ny = int(round(half_height / self.spacing)) + 1
        return CrackedRectangle(length, half_height, self.x0, nx, ny)


def lambda1(length: float, half_height: float, config: ScanConfig = ScanConfig()) -> float:
    """``lambda1`` for unit slopes by the configured method."""
    if config.method == "analytic":
        return analytic_lambda1(length, half_height)
    domain = config.domain(length, half_height)
    if config.method == "modes":
        return lambda1_modes(domain, SlopeConfig(), config.n_modes).lambda1
    return lambda1_grid(domain, SlopeConfig(), basis_size=config.basis_size).lambda1


def _positive_sorted(values, name: str) -> list[float]:
    vals = sorted({float(v) for v in values})
    if not vals or vals[0] <= 0 or not all(math.isfinite(v) for v in vals):
        raise OutOfRangeError(f"{name} must be a nonempty set of positive finite numbers")
    return vals


def _parallel_map(fn, items, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(*it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*items)))


# ---------------------------------------------------------------------------
# lambda1 over a parameter grid


@dataclass(frozen=True, order=True)
class ScanRow:
    ell: float
    y0: float
    lambda1: float
    stable: bool
    method: str


@dataclass(frozen=True, order=True)
class ContourPoint:
    """Length ``ell_star`` at which ``lambda1 = 1`` for a given ``y0`` (``inf`` if none)."""

    y0: float
    ell_star: float


def _scan_one(ell: float, y0: float, config: ScanConfig) -> ScanRow:
    lam = lambda1(ell, y0, config)
    return ScanRow(ell, y0, lam, bool(lam < 1.0), config.method)


def scan_lambda1(ells, y0s, config: ScanConfig = ScanConfig()) -> list[ScanRow]:
    """``lambda1`` on the product of ``ells`` and ``y0s``, rows sorted by ``(ell, y0)``."""
    items = [(ell, y0, config) for ell in _positive_sorted(ells, "ell") for y0 in _positive_sorted(y0s, "y0")]
    return sorted(_parallel_map(_scan_one, items, config.workers))


def threshold_contour(y0s) -> list[ContourPoint]:
    return [ContourPoint(y0, threshold_length(y0)) for y0 in _positive_sorted(y0s, "y0")]


def nondecreasing_along(rows: list[ScanRow], axis: str) -> bool:
    """Whether ``lambda1`` is nondecreasing in ``axis`` (``"y0"`` or ``"ell"``) with the other fixed."""
    other = "ell" if axis == "y0" else "y0"
    groups: dict = {}
    for r in rows:
        groups.setdefault(getattr(r, other), []).append(r)
    for group in groups.values():
        group.sort(key=lambda r: getattr(r, axis))
        lam = [r.lambda1 for r in group]
        if any(b < a for a, b in zip(lam, lam[1:])):
            return False
    return True


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(rows, columns: tuple[str, ...] | None = None) -> str:
    """CSV text with a header row; the columns default to the row fields in order."""
    if not rows and columns is None:
        raise OutOfRangeError("cannot infer CSV columns from an empty table")
    columns = columns or tuple(f.name for f in fields(rows[0]))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for r in rows:
        writer.writerow([_format(getattr(r, c)) for c in columns])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# thin rectangles


@dataclass(frozen=True, order=True)
class TubularRow:
    y0: float
    lambda1: float
    ratio: float
    stable: bool


@dataclass(frozen=True)
class TubularReport:
    """``lambda1`` on ever thinner rectangles of fixed length.

    ``slope`` is the least-squares slope of ``lambda1`` against ``y0``
    through the origin over rows with ``y0 <= fit_below``.
    """

    ell: float
    rows: tuple
    slope: float
    fit_below: float
    monotone: bool


def tubular_shrink(ell: float, y0s, config: ScanConfig = ScanConfig(), fit_below: float = 1e-2) -> TubularReport:
    """Rows sorted by decreasing ``y0``; ``lambda1 / y0`` tends to 4."""
    if not (ell > 0 and math.isfinite(ell)):
        raise OutOfRangeError(f"ell must be positive, got {ell!r}")
    ys = _positive_sorted(y0s, "y0")[::-1]
    lams = _parallel_map(lambda1, [(ell, y, config) for y in ys], config.workers)
    rows = tuple(TubularRow(y, lam, lam / y, bool(lam < 1.0)) for y, lam in zip(ys, lams))
    small = [r for r in rows if r.y0 <= fit_below]
    if small:
        y = np.array([r.y0 for r in small])
        lam = np.array([r.lambda1 for r in small])
        slope = float(np.dot(y, lam) / np.dot(y, y))
    else:
        slope = math.nan
    monotone = all(b.lambda1 <= a.lambda1 for a, b in zip(rows, rows[1:]))
    return TubularReport(float(ell), rows, slope, fit_below, monotone)


# ---------------------------------------------------------------------------
# small supports


@dataclass(frozen=True, order=True)
class SupportRow:
    radius: float
    lambda1: float
    stable: bool
    basis_size: int


@dataclass(frozen=True)
class SupportReport:
    ell: float
    y0: float
    center: float
    global_lambda1: float
    rows: tuple
    strictly_decreasing: bool


def localized_lambda1(domain: CrackedRectangle, center: float, radius: float, basis_size: int,
                      slopes: SlopeConfig = SlopeConfig()) -> tuple[float, int]:
    """Ritz value of ``T`` over sines supported in ``[center - r, center + r]``."""
    lo, hi = center - radius, center + radius
    if lo < domain.x0 - 1e-12 or hi > domain.x0 + domain.length + 1e-12:
        raise OutOfRangeError(f"support [{lo}, {hi}] leaves the crack")
    x = domain.x_interior
    inside = int(np.count_nonzero((x > lo) & (x < hi)))
    if inside < 4:
        raise OutOfRangeError(
            f"radius {radius!r} leaves only {inside} interior grid nodes in the support; at least 4 are needed"
        )
    m = min(basis_size, inside)
    return lambda1_grid(domain, slopes, basis_size=m, support=(lo, hi)).lambda1, m


def support_shrink(ell: float, y0: float, radii, nx: int = 513, ny: int = 257, basis_size: int = 16,
                   x0: float = 0.0) -> SupportReport:
    """Localized ``lambda1`` for supports centred at the crack midpoint, largest radius first."""
    domain = CrackedRectangle(ell, y0, x0, nx, ny)
    center = x0 + ell / 2.0
    rs = _positive_sorted(radii, "radii")[::-1]
    if rs[0] > ell / 2.0 + 1e-12:
        raise OutOfRangeError(f"radius must not exceed ell/2 = {ell / 2.0}")
    rows = []
    for r in rs:
        lam, m = localized_lambda1(domain, center, min(r, ell / 2.0), basis_size)
        rows.append(SupportRow(r, lam, bool(lam < 1.0), m))
    strictly = all(b.lambda1 < a.lambda1 for a, b in zip(rows, rows[1:]))
    global_lam = lambda1_grid(domain, SlopeConfig(), basis_size=basis_size, refine=False).lambda1
    return SupportReport(float(ell), float(y0), center, global_lam, tuple(rows), strictly)


# ---------------------------------------------------------------------------
# scaling


@dataclass(frozen=True, order=True)
class ScalingRow:
    s: float
    analytic: float
    analytic_linear: float
    analytic_rel_error: float
    grid: float | None
    grid_rel_error: float | None
    stable: bool


@dataclass(frozen=True)
class ScalingReport:
    """``lambda1(s l, s y0)`` against ``s lambda1(l, y0)``; ``s_star = 1 / lambda1(l, y0)``."""

    ell: float
    y0: float
    lambda1: float
    s_star: float
    rows: tuple


def scaling_check(ell: float, y0: float, s_list, config: ScanConfig | None = None) -> ScalingReport:
    """Compare the dilated rectangles with the linear law; ``config`` enables a grid column."""
    base = analytic_lambda1(ell, y0)
    base_grid = lambda1(ell, y0, config) if config is not None else None
    rows = []
    for s in _positive_sorted(s_list, "s"):
        exact = analytic_lambda1(s * ell, s * y0)
        linear = s * base
        grid = grid_err = None
        if config is not None:
            grid = lambda1(s * ell, s * y0, config)
            grid_err = abs(grid - s * base_grid) / abs(s * base_grid)
        rows.append(ScalingRow(s, exact, linear, abs(exact - linear) / linear, grid, grid_err, bool(exact < 1.0)))
    return ScalingReport(float(ell), float(y0), base, 1.0 / base, tuple(rows))


def rows_as_tuples(rows) -> list[tuple]:
    return [astuple(r) for r in rows]
