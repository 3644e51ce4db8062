"""Acceptance checks shared by ``crackstab verify`` and the test suite.

Each ``criterion_<n>`` runs its checks at the stated resolution and tolerance
and returns a :class:`CriterionResult`.  Expensive intermediate results
(grid eigenpairs, finite-difference runs) are memoised on an
:class:`AcceptanceContext` so that criteria sharing them do not recompute.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from crackstab import closedform, stability
from crackstab.elliptic import SlopeConfig, dirichlet_energy
from crackstab.geometry import (
    CrackedRectangle,
    CrackFunction,
    build_flow,
    cosine_bump,
    crack_length,
    graph_mean_curvature,
    sine_mode,
)
from crackstab.secondvar import (
    Classification,
    classify,
    fd_richardson,
    first_variation,
    quadratic_form,
    solve_v_phi,
)
from crackstab.spectral import apply_T, dual_mu, lambda1_grid, lambda1_modes, sim_inner

PARAMETER_SET = ((1.0, 1.0), (2.0, 0.5), (math.pi, 1.0), (math.pi / 2.0, 2.0))
RECIPROCITY_SET = PARAMETER_SET[:3]
FD_PHIS = ("coslike:2", "sin:1", "sin:3")
FD_SLOPES = ((1.0, 1.0), (1.0, 2.0))
TOTAL_BUDGET_S = 600.0


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    bound: float
    passed: bool

    def __str__(self) -> str:
        return f"{self.name}: {self.value:.6g} (bound {self.bound:.3g}) {'ok' if self.passed else 'FAILED'}"


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    checks: tuple
    seconds: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        worst = self.failures()[0] if not self.passed else None
        tail = f"; first failure {worst}" if worst else ""
        return f"criterion {self.number:2d} {status}  {self.title} [{len(self.checks)} checks, {self.seconds:.1f} s]{tail}"


def _le(name: str, value: float, bound: float) -> Check:
    return Check(name, float(value), float(bound), bool(value <= bound))


def _ge(name: str, value: float, bound: float) -> Check:
    return Check(name, float(value), float(bound), bool(value >= bound))


def _true(name: str, flag: bool) -> Check:
    return Check(name, float(bool(flag)), 1.0, bool(flag))


def make_phi(domain: CrackedRectangle, spec: str) -> CrackFunction:
    """``sin:k`` or ``coslike:k`` on ``domain``."""
    kind, _, k = spec.partition(":")
    if kind == "sin":
        return sine_mode(domain, int(k))
    if kind == "coslike":
        return cosine_bump(domain, int(k))
    raise ValueError(f"unknown crack function {spec!r}")


@dataclass
class AcceptanceContext:
    """Resolutions and memoised results for one acceptance run."""

    nx: int = 513
    basis_size: int = 32
    n_modes: int = 64
    classify_nx: int = 257
    scan_nx: int = 257
    fd_step: float = 1e-2
    seed: int = 20240917
    started: float = field(default_factory=time.perf_counter)
    _grid: dict = field(default_factory=dict, repr=False)
    _grid_time: dict = field(default_factory=dict, repr=False)
    _fd: dict = field(default_factory=dict, repr=False)

    def domain(self, ell: float, y0: float, nx: int | None = None) -> CrackedRectangle:
        n = nx or self.nx
        return CrackedRectangle(ell, y0, 0.0, n, n)

    def grid_report(self, ell: float, y0: float):
        key = (ell, y0)
        if key not in self._grid:
            t0 = time.perf_counter()
            self._grid[key] = lambda1_grid(self.domain(ell, y0), SlopeConfig(), basis_size=self.basis_size)
            self._grid_time[key] = time.perf_counter() - t0
        return self._grid[key], self._grid_time[key]

    def fd_run(self, phi_spec: str, slopes: tuple[float, float]):
        """Richardson estimate and quadratic form on the unit square at ``nx``."""
        key = (phi_spec, slopes)
        if key not in self._fd:
            domain = self.domain(1.0, 1.0)
            phi = make_phi(domain, phi_spec)
            sc = SlopeConfig(*slopes)
            flow = build_flow(domain, phi, 0.5 * domain.half_height)
            rich = fd_richardson(domain, flow, sc, self.fd_step)
            q = quadratic_form(domain, phi, sc)
            self._fd[key] = (rich, q, first_variation(domain, phi, sc))
        return self._fd[key]


# ---------------------------------------------------------------------------


def criterion_1(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.perf_counter()
    checks = []
    for ell, y0 in PARAMETER_SET:
        rep, secs = ctx.grid_report(ell, y0)
        exact = closedform.analytic_lambda1(ell, y0)
        checks.append(_le(f"grid lambda1 rel. error (l={ell:.4g}, y0={y0:g})", abs(rep.lambda1 - exact) / exact, 1e-2))
        checks.append(_le(f"grid run seconds (l={ell:.4g}, y0={y0:g})", secs, 60.0))
    return CriterionResult(1, "grid lambda1 matches the closed form", tuple(checks), time.perf_counter() - t0)


def criterion_2(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.perf_counter()
    checks = []
    for ell, y0 in PARAMETER_SET:
        t1 = time.perf_counter()
        rep = lambda1_modes(ctx.domain(ell, y0), SlopeConfig(), ctx.n_modes)
        secs = time.perf_counter() - t1
        exact = closedform.analytic_lambda1(ell, y0)
        checks.append(_le(f"mode lambda1 abs. error (l={ell:.4g}, y0={y0:g})", abs(rep.lambda1 - exact), 1e-6))
        checks.append(_le(f"mode run seconds (l={ell:.4g}, y0={y0:g})", secs, 5.0))
    return CriterionResult(2, "mode lambda1 matches the closed form", tuple(checks), time.perf_counter() - t0)


def criterion_3(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.perf_counter()
    checks = []
    for ell, y0 in RECIPROCITY_SET:
        rep, _ = ctx.grid_report(ell, y0)
        mu = dual_mu(ctx.domain(ell, y0), SlopeConfig())
        checks.append(_le(f"|lambda1 mu - 1| (l={ell:.4g}, y0={y0:g})", abs(rep.lambda1 * mu - 1.0), 1e-2))
    return CriterionResult(3, "reciprocity lambda1 * mu = 1", tuple(checks), time.perf_counter() - t0)


def criterion_4(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.perf_counter()
    checks = []
    for ell, y0 in PARAMETER_SET:
        rep, _ = ctx.grid_report(ell, y0)
        domain = rep.eigenfunction.domain
        w = domain.crack_weights
        phi = rep.eigenfunction.nodal
        ref = cosine_bump(domain, 2).nodal
        phi = phi / math.sqrt(np.dot(w, phi * phi))
        ref = ref / math.sqrt(np.dot(w, ref * ref))
        if np.dot(w, phi * ref) < 0:
            phi = -phi
        dist = math.sqrt(np.dot(w, (phi - ref) ** 2))
        checks.append(_le(f"normalized L2 distance to cos - 1 (l={ell:.4g}, y0={y0:g})", dist, 1e-2))
    return CriterionResult(4, "leading eigenfunction is cos(2 pi x / l) - 1", tuple(checks), time.perf_counter() - t0)


def criterion_5(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.perf_counter()
    checks = []
    for spec in FD_PHIS:
        rich, _, _ = ctx.fd_run(spec, (1.0, 1.0))
        g1 = max(abs(rich.coarse.g1), abs(rich.fine.g1), abs(rich.g1))
        checks.append(_le(f"|g1| at alpha = beta, phi = {spec}", g1, 1e-6))
    rich, _, fv = ctx.fd_run("sin:1", (1.0, 2.0))
    exact = 3.0 * 2.0 / math.pi
    checks.append(_le("g1 vs (beta^2 - alpha^2) int phi, alpha=1, beta=2, phi = sin:1",
                      abs(rich.g1 - exact) / exact, 1e-2))
    checks.append(_le("first_variation vs exact integral", abs(fv - exact) / exact, 1e-2))
    return CriterionResult(5, "first variation from finite differences", tuple(checks), time.perf_counter() - t0)


def criterion_6(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.perf_counter()
    checks = []
    for spec in FD_PHIS:
        for slopes in FD_SLOPES:
            rich, q, _ = ctx.fd_run(spec, slopes)
            rel = abs(rich.g2 - q.total) / abs(q.total)
            checks.append(_le(f"|g2 - Q| / |Q|, phi = {spec}, alpha={slopes[0]:g}, beta={slopes[1]:g}", rel, 2e-2))
    return CriterionResult(6, "second variation from finite differences", tuple(checks), time.perf_counter() - t0)


def criterion_7(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.perf_counter()
    ell_star = closedform.threshold_length(1.0)
    checks = [_le("|l* - 1.5718|", abs(ell_star - 1.5718), 5e-4)]
    for method in ("grid", "modes"):
        for factor, expected in ((0.9, Classification.POSITIVE_DEFINITE), (1.1, Classification.INDEFINITE)):
            domain = ctx.domain(factor * ell_star, 1.0, ctx.classify_nx)
            rep = classify(domain, SlopeConfig(), method=method, basis_size=ctx.basis_size, n_modes=ctx.n_modes)
            checks.append(_true(f"{method}: l = {factor} l* gives {expected.value} (got {rep.classification.value})",
                                rep.classification is expected))
            if rep.classification is Classification.INDEFINITE:
                checks.append(_le(f"{method}: Q(witness) < 0 at l = {factor} l*", rep.witness_total, -1e-12))
                if method == "grid":
                    # the energy itself decreases to second order along the witness direction
                    flow = build_flow(domain, rep.witness, 0.5 * domain.half_height)
                    g2 = fd_richardson(domain, flow, SlopeConfig(), min(ctx.fd_step, flow.t_max / 4)).g2
                    checks.append(_le(f"grid: FD g2 along the witness at l = {factor} l*", g2, -1e-12))
    return CriterionResult(7, "stability flips at the threshold length", tuple(checks), time.perf_counter() - t0)


def criterion_8(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.perf_counter()
    checks = []
    pairs = [(1.0, 1.0), (3.0, 0.2)] + [(a, b) for a in (0.5, 1, 2, 4) for b in (0.5, 1, 2, 4)]
    for ell, y0 in pairs:
        rep = closedform.no_root_check(float(ell), float(y0))
        checks.append(_true(f"no root above lambda1 (l={ell:g}, y0={y0:g})", rep.passed))
    xs = np.geomspace(1e-3, 20.0, 400)
    witnesses = [closedform.inequality_witness(float(x)) for x in xs]
    checks.append(_ge("min lhs - rhs over x in [1e-3, 20]", min(w.lhs - w.rhs for w in witnesses), 0.09))
    checks.append(_le("max identity gap of the tanh ratio", max(w.identity_gap for w in witnesses), 1e-10))
    checks.append(_true("inequality holds at every sampled x", all(w.ok for w in witnesses)))
    return CriterionResult(8, "odd branch never exceeds the even one", tuple(checks), time.perf_counter() - t0)


def criterion_9(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.perf_counter()
    checks = []
    analytic = stability.scan_lambda1((0.5, 1, 1.5, 2, 3, 4), (0.1, 0.25, 0.5, 1, 2))
    checks.append(_true("analytic scan nondecreasing in y0", stability.nondecreasing_along(analytic, "y0")))
    checks.append(_true("analytic scan nondecreasing in l", stability.nondecreasing_along(analytic, "ell")))
    # nested grids: the discrete lambda1 is then monotone under inclusion of rectangles
    grid_cfg = stability.ScanConfig(method="grid", basis_size=24, spacing=1.0 / (ctx.scan_nx - 1))
    grid = stability.scan_lambda1((0.5, 1.0, 2.0), (0.25, 0.5, 1.0), grid_cfg)
    checks.append(_true("grid scan nondecreasing in y0", stability.nondecreasing_along(grid, "y0")))
    checks.append(_true("grid scan nondecreasing in l", stability.nondecreasing_along(grid, "ell")))
    worst = max(abs(r.lambda1 - closedform.analytic_lambda1(r.ell, r.y0)) / r.lambda1 for r in grid)
    checks.append(_le("grid scan rel. deviation from analytic", worst, 1e-2))
    analytic_scaling = stability.scaling_check(1.0, 1.0, (0.5, 2.0, 10.0))
    checks.append(_le("analytic scaling rel. error", max(r.analytic_rel_error for r in analytic_scaling.rows), 1e-14))
    grid_scaling = stability.scaling_check(1.0, 1.0, (0.5, 2.0, 10.0),
                                           stability.ScanConfig(method="grid", nx=129, ny=129))
    checks.append(_le("grid scaling rel. error", max(r.grid_rel_error for r in grid_scaling.rows), 1e-2))
    return CriterionResult(9, "monotonicity and scaling", tuple(checks), time.perf_counter() - t0)


def criterion_10(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.perf_counter()
    checks = []
    y0s = (0.1, 0.03, 0.01, 0.003, 0.001)
    for method in ("analytic", "modes"):
        rep = stability.tubular_shrink(1.0, y0s, stability.ScanConfig(method=method))
        checks.append(_le(f"{method}: |slope - 4| / 4 for y0 <= 1e-2", abs(rep.slope - 4.0) / 4.0, 1e-2))
        checks.append(_true(f"{method}: lambda1 decreases with y0", rep.monotone))
        checks.append(_true(f"{method}: every row with 4 y0 < 0.99 is stable",
                            all(r.stable for r in rep.rows if 4.0 * r.y0 < 0.99)))
    ell = math.pi
    support = stability.support_shrink(ell, 1.0, (ell / 2, ell / 4, ell / 8, ell / 16), nx=ctx.nx, ny=257)
    checks.append(_ge("global lambda1 at l = pi, y0 = 1", support.global_lambda1, 1.0))
    checks.append(_true("localized lambda1 strictly decreasing as r shrinks", support.strictly_decreasing))
    checks.append(_le("localized lambda1 at r = l/16", support.rows[-1].lambda1, 1.0 - 1e-12))
    checks.append(_le("r = l/2 reproduces the global Ritz value",
                      abs(support.rows[0].lambda1 - support.global_lambda1) / support.global_lambda1, 1e-10))
    return CriterionResult(10, "thin rectangles and small supports are stable", tuple(checks),
                           time.perf_counter() - t0)


def _random_phis(domain: CrackedRectangle, rng: np.random.Generator, count: int) -> list[CrackFunction]:
    """Alternating smooth (decaying sine series) and rough (nodal noise) crack functions."""
    x = domain.reference_coordinate(domain.x_interior)
    out = []
    for i in range(count):
        if i % 2 == 0:
            k = np.arange(1, 17)
            c = rng.standard_normal(k.size) / k
            vals = np.sin(np.pi * np.outer(x, k)) @ c
        else:
            vals = rng.standard_normal(x.size)
        out.append(CrackFunction(vals, domain))
    return out


def criterion_11(ctx: AcceptanceContext) -> CriterionResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(ctx.seed)
    domain = ctx.domain(1.0, 1.0, 129)
    s = SlopeConfig()
    checks = []

    phis = _random_phis(domain, rng, 50)
    worst_sign, worst_gap = math.inf, 0.0
    for phi in phis:
        tp = sim_inner(apply_T(phi, s), phi)
        e2 = 2.0 * dirichlet_energy(solve_v_phi(domain, phi, s))
        worst_sign = min(worst_sign, tp)
        worst_gap = max(worst_gap, abs(tp - e2) / e2)
    checks.append(_ge("min (T phi, phi)~ over 50 random phi", worst_sign, 0.0))
    checks.append(_le("max rel. gap (T phi, phi)~ vs 2 E(v_phi)", worst_gap, 1e-8))

    worst_sa = 0.0
    for phi, psi in zip(phis[0:20:2], phis[1:20:2]):
        lhs = sim_inner(apply_T(phi, s), psi)
        rhs = sim_inner(phi, apply_T(psi, s))
        scale = math.sqrt(sim_inner(phi, phi) * sim_inner(psi, psi))
        worst_sa = max(worst_sa, abs(lhs - rhs) / scale)
    checks.append(_le("self-adjointness defect", worst_sa, 1e-8))

    for slopes in (SlopeConfig(1.0, 1.0), SlopeConfig(1.0, 2.0)):
        tag = f"alpha={slopes.alpha:g}, beta={slopes.beta:g}"
        worst_h = 0.0
        for phi in phis[:5]:
            q1 = quadratic_form(domain, phi, slopes).total
            for c in (-1.0, 2.0, 10.0):
                qc = quadratic_form(domain, phi * c, slopes).total
                worst_h = max(worst_h, abs(qc - c * c * q1) / abs(c * c * q1))
        checks.append(_le(f"homogeneity Q(c phi) = c^2 Q(phi), {tag}", worst_h, 1e-10))
        worst_p = 0.0
        for phi, psi in zip(phis[0:10:2], phis[1:10:2]):
            qa = quadratic_form(domain, phi + psi, slopes).total
            qb = quadratic_form(domain, phi - psi, slopes).total
            qp = quadratic_form(domain, phi, slopes).total
            qq = quadratic_form(domain, psi, slopes).total
            rhs = 2.0 * qp + 2.0 * qq
            worst_p = max(worst_p, abs(qa + qb - rhs) / max(abs(rhs), abs(qa) + abs(qb)))
        checks.append(_le(f"parallelogram law, {tag}", worst_p, 1e-9))

    area_domain = CrackedRectangle(1.0, 1.0, 0.0, 1025, 8)
    flow = build_flow(area_domain, sine_mode(area_domain, 1), 0.5)
    t, h = 0.2, 1e-4
    fd = (crack_length(flow, t + h) - crack_length(flow, t - h)) / (2.0 * h)
    H = graph_mean_curvature(flow, t)
    exact = float(np.dot(area_domain.crack_weights, H * flow.phi.nodal))
    checks.append(_le("area first variation: |dL/dt - int H_t phi| / |dL/dt|", abs(fd - exact) / abs(fd), 1e-2))

    elapsed_total = time.perf_counter() - ctx.started
    checks.append(_le("acceptance run seconds so far", elapsed_total, TOTAL_BUDGET_S))
    return CriterionResult(11, "operator and quadratic-form properties", tuple(checks), time.perf_counter() - t0)


CRITERIA = {n: globals()[f"criterion_{n}"] for n in range(1, 12)}


def run_all(selection=None, ctx: AcceptanceContext | None = None, stream=None) -> list[CriterionResult]:
    """Run the selected criteria in order, printing one line each to ``stream``."""
    ctx = ctx or AcceptanceContext()
    results = []
    for n in sorted(selection or CRITERIA):
        result = CRITERIA[n](ctx)
        results.append(result)
        if stream is not None:
            print(result.line(), file=stream, flush=True)
    return results
