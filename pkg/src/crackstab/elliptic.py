"""Mixed Dirichlet/Neumann problems for ``div(A grad v) = 0`` on each half.

Each half is discretised in local coordinates ``(x, s)`` with ``s = |y|`` the
distance from the crack, so both halves share one assembly routine.  The
discrete energy of a grid function is

    E(v) = hx hy / 4 * sum_cells sum_corners A_c[g_k, g_k],

where ``g_k`` is the gradient at corner ``k`` of the cell built from the two
cell edges meeting there and ``A_c`` is the average of the nodal metric over
the four vertices.  For ``A = I`` this is exactly the 5-point stencil with
half-cell rows on the crack, i.e. ghost-node elimination of a centred
Neumann condition.  Neumann data enter through the trapezoid rule on the
crack, so the stiffness matrix is symmetric and ``E(v)`` equals ``v^T K v``.
"""

from __future__ import annotations

import enum
import hashlib
import logging
import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from crackstab.errors import SolverError
from crackstab.geometry import CrackedRectangle, CrackFunction, Flow, PullbackMetric, pullback_metric

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
# Above this many unknowns per half the direct factorisation is replaced by AMG-CG.
DIRECT_LIMIT = 1025 * 1025
# Budget for cached LU factors, counted in stored nonzeros of L + U.
CACHE_NNZ_BUDGET = 150_000_000


class Half(enum.Enum):
    UPPER = "upper"
    LOWER = "lower"

    @property
    def sign(self) -> int:
        """``+1`` above the crack, ``-1`` below."""
        return 1 if self is Half.UPPER else -1


@dataclass(frozen=True, eq=False)
class HalfField:
    """Nodal values on one half grid.

    ``values[j, i]`` is the value at ``x = x0 + i hx`` and ``y = sign * j hy``;
    row 0 holds the trace on the crack from this side.
    """

    half: Half
    values: np.ndarray
    domain: CrackedRectangle

    def __post_init__(self):
        shape = (self.domain.ny, self.domain.nx)
        if np.shape(self.values) != shape:
            raise ValueError(f"half field must have shape {shape}, got {np.shape(self.values)}")

    @property
    def y(self) -> np.ndarray:
        return self.half.sign * self.domain.s


@dataclass(frozen=True, eq=False)
class PairField:
    """A function on ``U`` minus the crack, one independent field per side."""

    upper: HalfField
    lower: HalfField

    def __post_init__(self):
        if self.upper.domain != self.lower.domain:
            raise ValueError("both halves must live on the same rectangle")
        if self.upper.half is not Half.UPPER or self.lower.half is not Half.LOWER:
            raise ValueError("PairField expects (upper, lower) halves in this order")

    @property
    def domain(self) -> CrackedRectangle:
        return self.upper.domain

    @classmethod
    def from_arrays(cls, domain, upper, lower) -> "PairField":
        return cls(HalfField(Half.UPPER, np.asarray(upper, float), domain),
                   HalfField(Half.LOWER, np.asarray(lower, float), domain))

    @classmethod
    def sample(cls, domain: CrackedRectangle, f_upper, f_lower) -> "PairField":
        """Evaluate ``f_upper(x, y)`` for ``y >= 0`` and ``f_lower(x, y)`` for ``y <= 0``."""
        X, S = np.meshgrid(domain.x, domain.s)
        return cls.from_arrays(domain, f_upper(X, S), f_lower(X, -S))

    def __add__(self, other):
        return PairField.from_arrays(self.domain, self.upper.values + other.upper.values,
                                     self.lower.values + other.lower.values)

    def __sub__(self, other):
        return PairField.from_arrays(self.domain, self.upper.values - other.upper.values,
                                     self.lower.values - other.lower.values)

    def __mul__(self, c):
        return PairField.from_arrays(self.domain, c * self.upper.values, c * self.lower.values)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.upper.values)), np.max(np.abs(self.lower.values))))


@dataclass(frozen=True)
class SlopeConfig:
    """Background state ``u = alpha x`` above the crack and ``u = -beta x`` below.

    The pair is a critical point of the energy iff ``alpha == beta``; otherwise
    the first variation is driven by ``beta^2 - alpha^2``.
    """

    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"slopes must be positive, got alpha={self.alpha}, beta={self.beta}")

    @property
    def critical(self) -> bool:
        return self.alpha == self.beta

    @property
    def jump_coefficient(self) -> float:
        """``|grad u^-|^2 - |grad u^+|^2`` on the flat crack."""
        return self.beta**2 - self.alpha**2

    def tangential_slope(self, half: Half) -> float:
        """``d/dx`` of the background state on the given side."""
        return self.alpha if half is Half.UPPER else -self.beta

    def background(self, domain: CrackedRectangle) -> PairField:
        return PairField.sample(domain, lambda x, y: self.alpha * x, lambda x, y: -self.beta * x)


# ---------------------------------------------------------------------------
# assembly


def cell_average(nodal: np.ndarray) -> np.ndarray:
    """Mean of the four vertex values of every cell, crack-side pair first."""
    return ((nodal[:-1, :-1] + nodal[:-1, 1:]) + (nodal[1:, :-1] + nodal[1:, 1:])) / 4.0


def _local_cell_metric(metric: PullbackMetric | None, domain: CrackedRectangle, half: Half):
    if metric is None or metric.is_identity():
        return None
    if metric.domain != domain:
        raise ValueError("metric and field live on different rectangles")
    return tuple(cell_average(a) for a in metric.local(half is Half.UPPER))


def _difference_operators(nx, ny, hx, hy):
    dx = sp.diags([-1.0, 1.0], [0, 1], shape=(nx - 1, nx)) / hx
    dy = sp.diags([-1.0, 1.0], [0, 1], shape=(ny - 1, ny)) / hy
    rows_b = sp.eye(ny - 1, ny, format="csr")
    rows_t = sp.eye(ny - 1, ny, k=1, format="csr")
    cols_l = sp.eye(nx - 1, nx, format="csr")
    cols_r = sp.eye(nx - 1, nx, k=1, format="csr")
    gx_b = sp.kron(rows_b, dx, format="csr")
    gx_t = sp.kron(rows_t, dx, format="csr")
    gy_l = sp.kron(dy, cols_l, format="csr")
    gy_r = sp.kron(dy, cols_r, format="csr")
    return gx_b, gx_t, gy_l, gy_r


def assemble_stiffness(domain: CrackedRectangle, cell_metric=None) -> sp.csr_matrix:
    """Matrix ``K`` of the discrete energy on all nodes of one half."""
    nx, ny, hx, hy = domain.nx, domain.ny, domain.hx, domain.hy
    gx_b, gx_t, gy_l, gy_r = _difference_operators(nx, ny, hx, hy)
    ncell = (nx - 1) * (ny - 1)
    if cell_metric is None:
        c11 = c22 = sp.identity(ncell, format="csr")
        c12 = None
    else:
        c11, c12, c22 = (sp.diags(c.ravel()) for c in cell_metric)
    K = 2.0 * (gx_b.T @ c11 @ gx_b + gx_t.T @ c11 @ gx_t + gy_l.T @ c22 @ gy_l + gy_r.T @ c22 @ gy_r)
    if c12 is not None:
        gxs = gx_b + gx_t
        gys = gy_l + gy_r
        cross = gxs.T @ c12 @ gys
        K = K + cross + cross.T
    return (0.25 * hx * hy * K).tocsr()


def half_energy(values: np.ndarray, domain: CrackedRectangle, cell_metric=None) -> float:
    """Discrete energy of one half field; equal to ``v^T K v``."""
    v = np.asarray(values, dtype=float)
    hx, hy = domain.hx, domain.hy
    gxb = (v[:-1, 1:] - v[:-1, :-1]) / hx
    gxt = (v[1:, 1:] - v[1:, :-1]) / hx
    gyl = (v[1:, :-1] - v[:-1, :-1]) / hy
    gyr = (v[1:, 1:] - v[:-1, 1:]) / hy
    if cell_metric is None:
        dens = 2.0 * (gxb**2 + gxt**2 + gyl**2 + gyr**2)
    else:
        c11, c12, c22 = cell_metric
        dens = (2.0 * c11 * (gxb**2 + gxt**2) + 2.0 * c22 * (gyl**2 + gyr**2)
                + 2.0 * c12 * (gxb + gxt) * (gyl + gyr))
    return float(0.25 * hx * hy * np.sum(dens))


def _free_mask(domain: CrackedRectangle) -> np.ndarray:
    mask = np.zeros((domain.ny, domain.nx), dtype=bool)
    mask[:-1, 1:-1] = True
    return mask


class _HalfSystem:
    """Stiffness matrix of one half split into free / Dirichlet blocks, factorised."""

    def __init__(self, domain: CrackedRectangle, cell_metric):
        self.domain = domain
        K = assemble_stiffness(domain, cell_metric)
        mask = _free_mask(domain).ravel()
        self.free = np.flatnonzero(mask)
        self.fixed = np.flatnonzero(~mask)
        self.K = K
        self.K_ff = K[self.free][:, self.free].tocsc()
        self.K_fd = K[self.free][:, self.fixed].tocsr()
        self.nnz = 0
        self._lu = None
        self._amg = None
        if self.K_ff.shape[0] <= DIRECT_LIMIT:
            try:
                self._lu = spla.splu(self.K_ff, permc_spec="MMD_AT_PLUS_A",
                                     options=dict(SymmetricMode=True))
            except (RuntimeError, MemoryError) as exc:
                logger.warning("direct factorisation failed (%s); falling back to AMG-CG", exc)
            else:
                self.nnz = self._lu.L.nnz + self._lu.U.nnz
        if self._lu is None:
            import pyamg

            self._amg = pyamg.smoothed_aggregation_solver(self.K_ff.tocsr(), symmetry="symmetric")

    def _condition_hint(self) -> str:
        if self._lu is None:
            return "iterative solver"
        d = np.abs(self._lu.U.diagonal())
        return f"|diag U| ranges over [{d.min():.3e}, {d.max():.3e}]"

    def _raw_solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._lu is not None:
            return self._lu.solve(rhs)
        cols = rhs.reshape(rhs.shape[0], -1)
        out = np.column_stack([self._amg.solve(c, tol=1e-12, accel="cg", maxiter=500) for c in cols.T])
        return out.reshape(rhs.shape)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        x = self._raw_solve(rhs)
        err = self._relative_residual(x, rhs)
        if err > RESIDUAL_TOL:
            x = x + self._raw_solve(rhs - self.K_ff @ x)
            err = self._relative_residual(x, rhs)
        if not np.all(np.isfinite(x)) or err > RESIDUAL_TOL:
            raise SolverError(
                f"relative residual {err:.3e} exceeds {RESIDUAL_TOL:.0e}; {self._condition_hint()}"
            )
        return x

    def _relative_residual(self, x, rhs) -> float:
        r = self.K_ff @ x - rhs
        scale = np.linalg.norm(rhs, axis=0)
        scale = np.where(scale == 0.0, 1.0, scale)
        return float(np.max(np.linalg.norm(r.reshape(rhs.shape), axis=0) / scale))


class _SystemCache:
    """LRU cache of factorised half systems keyed by grid and cell metric bytes."""

    def __init__(self, nnz_budget: int):
        self.nnz_budget = nnz_budget
        self._items: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    @staticmethod
    def key(domain: CrackedRectangle, cell_metric) -> tuple:
        if cell_metric is None:
            digest = "identity"
        else:
            h = hashlib.sha1()
            for c in cell_metric:
                h.update(np.ascontiguousarray(c).tobytes())
            digest = h.hexdigest()
        return (domain.nx, domain.ny, domain.hx, domain.hy, digest)

    def get(self, domain: CrackedRectangle, cell_metric) -> _HalfSystem:
        key = self.key(domain, cell_metric)
        with self._lock:
            if key in self._items:
                self._items.move_to_end(key)
                return self._items[key]
            system = _HalfSystem(domain, cell_metric)
            self._items[key] = system
            while len(self._items) > 1 and sum(s.nnz for s in self._items.values()) > self.nnz_budget:
                self._items.popitem(last=False)
            return system

    def clear(self) -> None:
        with self._lock:
            self._items.clear()


_CACHE = _SystemCache(CACHE_NNZ_BUDGET)


def clear_factorization_cache() -> None:
    _CACHE.clear()


def half_system(domain: CrackedRectangle, half: Half, metric: PullbackMetric | None = None) -> _HalfSystem:
    return _CACHE.get(domain, _local_cell_metric(metric, domain, half))


# ---------------------------------------------------------------------------
# public solvers


def _neumann_interior(domain: CrackedRectangle, neumann) -> np.ndarray:
    if neumann is None:
        return np.zeros(domain.nx - 2)
    if isinstance(neumann, CrackFunction):
        return neumann.values
    g = np.asarray(neumann, dtype=float)
    if g.shape == (domain.nx,):
        return g[1:-1]
    if g.shape == (domain.nx - 2,):
        return g
    if g.ndim == 2 and g.shape[0] == domain.nx - 2:
        return g
    raise ValueError(f"Neumann data must have {domain.nx} or {domain.nx - 2} entries, got {g.shape}")


def _dirichlet_local(domain: CrackedRectangle, half: Half, dirichlet) -> np.ndarray | None:
    if dirichlet is None:
        return None
    if callable(dirichlet):
        X, S = np.meshgrid(domain.x, domain.s)
        return np.asarray(dirichlet(X, half.sign * S), dtype=float) * np.ones_like(X)
    data = np.asarray(dirichlet, dtype=float)
    if data.shape != (domain.ny, domain.nx):
        raise ValueError(f"Dirichlet array must have shape {(domain.ny, domain.nx)}, got {data.shape}")
    return data


def neumann_load(domain: CrackedRectangle, half: Half, g: np.ndarray) -> np.ndarray:
    """Right-hand side on the free nodes for conormal data ``g`` along ``nu = (0, 1)``.

    Above the crack the outward normal is ``-nu`` (load ``-g``), below it is
    ``+nu`` (load ``+g``).  Accepts one column per data set.
    """
    g = np.asarray(g, dtype=float)
    nfree = (domain.ny - 1) * (domain.nx - 2)
    rhs = np.zeros((nfree,) + g.shape[1:])
    rhs[: domain.nx - 2] = -half.sign * domain.hx * g
    return rhs


def solve_half(domain: CrackedRectangle, half: Half, metric: PullbackMetric | None = None,
               dirichlet=None, neumann=None) -> HalfField:
    """Solve ``div(A grad v) = 0`` on one half.

    ``dirichlet`` gives the values on the two vertical sides and the outer
    horizontal edge, either as a callable ``f(x, y)`` in global coordinates or
    as a local ``(ny, nx)`` array; ``neumann`` is the conormal derivative
    ``(A grad v) . nu`` with ``nu = (0, 1)`` on the interior crack nodes.
    """
    system = half_system(domain, half, metric)
    rhs = neumann_load(domain, half, _neumann_interior(domain, neumann))
    values = np.zeros(domain.ny * domain.nx)
    data = _dirichlet_local(domain, half, dirichlet)
    if data is not None:
        fixed_values = data.ravel()[system.fixed]
        values[system.fixed] = fixed_values
        rhs = rhs - system.K_fd @ fixed_values
    values[system.free] = system.solve(rhs)
    return HalfField(half, values.reshape(domain.ny, domain.nx), domain)


def solve_neumann_many(domain: CrackedRectangle, half: Half, g: np.ndarray) -> np.ndarray:
    """Zero-Dirichlet solutions for several Neumann data at once.

    ``g`` has shape ``(nx - 2, k)``; the result has shape ``(ny, nx, k)``.
    """
    system = half_system(domain, half)
    g = np.asarray(g, dtype=float)
    sol = system.solve(neumann_load(domain, half, g))
    out = np.zeros((domain.ny * domain.nx, g.shape[1]))
    out[system.free] = sol
    return out.reshape(domain.ny, domain.nx, g.shape[1])


def solve_state(domain: CrackedRectangle, flow: Flow, t: float, slopes: SlopeConfig) -> PairField:
    """Pulled-back equilibrium ``u_{Phi_t} o Phi_t`` on the fixed grid.

    ``Phi_t`` is the identity on the outer boundary, so the Dirichlet data
    are the background state itself; on the crack the condition is the
    homogeneous conormal one, which is natural for the energy.
    """
    if flow.domain != domain:
        raise ValueError("flow is defined on a different rectangle")
    metric = pullback_metric(flow, t)
    upper = solve_half(domain, Half.UPPER, metric, dirichlet=lambda x, y: slopes.alpha * x)
    lower = solve_half(domain, Half.LOWER, metric, dirichlet=lambda x, y: -slopes.beta * x)
    return PairField(upper, lower)


def dirichlet_energy(field: PairField, metric: PullbackMetric | None = None) -> float:
    """``int_U A[grad v, grad v]`` summed over both halves."""
    domain = field.domain
    total = 0.0
    for hf in (field.upper, field.lower):
        total += half_energy(hf.values, domain, _local_cell_metric(metric, domain, hf.half))
    return total


@dataclass(frozen=True, eq=False)
class CrackTraces:
    """Two-sided traces and ``d/dy`` derivatives on the crack nodes."""

    upper: np.ndarray
    lower: np.ndarray
    upper_normal: np.ndarray
    lower_normal: np.ndarray

    def __iter__(self):
        return iter((self.upper, self.lower, self.upper_normal, self.lower_normal))


def one_sided_normal(values: np.ndarray, hy: float) -> np.ndarray:
    """Second-order one-sided ``d/ds`` at row 0 of a local half array."""
    return (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * hy)


def crack_traces(field: PairField) -> CrackTraces:
    """Traces and normal derivatives along ``nu = (0, 1)`` on both sides."""
    hy = field.domain.hy
    up, lo = field.upper.values, field.lower.values
    return CrackTraces(up[0].copy(), lo[0].copy(), one_sided_normal(up, hy), -one_sided_normal(lo, hy))
