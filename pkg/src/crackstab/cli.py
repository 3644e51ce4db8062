"""Command-line front end.

Every subcommand reads its parameters from flags, then from an optional flat
``key = value`` file given by ``--config``, then from built-in defaults.
Data go to stdout (or ``--out``); diagnostics go to stderr.

Exit codes: 0 success, 1 a check ran but failed, 2 invalid flags or
parameters, 3 solver failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import enum
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from crackstab import closedform, stability
from crackstab.acceptance import AcceptanceContext, make_phi, run_all
from crackstab.config import load_config
from crackstab.elliptic import SlopeConfig
from crackstab.errors import SolverError
from crackstab.geometry import CrackedRectangle, CrackFunction, build_flow
from crackstab.secondvar import CoefficientA, classify, fd_check, fd_richardson, quadratic_form
from crackstab.spectral import dual_mu, lambda1_analytic, lambda1_grid, lambda1_modes
from crackstab.serialize import dumps, to_jsonable

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3

logger = logging.getLogger("crackstab")


class UsageError(Exception):
    """Bad flag or config value; reported with the subcommand usage and exit 2."""


# ---------------------------------------------------------------------------
# parameter conversion


def _positive_float(text: str) -> float:
    v = float(text)
    if not (v > 0 and math.isfinite(v)):
        raise ValueError(f"expected a positive number, got {text!r}")
    return v


def _finite_float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError(f"expected a finite number, got {text!r}")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise ValueError(f"expected a positive integer, got {text!r}")
    return v


def _grid_size(text: str) -> int:
    v = int(text)
    if v < 5:
        raise ValueError(f"grid sizes must be at least 5, got {text!r}")
    return v


def _bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _float_list(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:count`` (inclusive, evenly spaced)."""
    text = text.strip()
    if text.count(":") == 2:
        lo, hi, n = text.split(":")
        return [float(v) for v in np.linspace(float(lo), float(hi), int(n))]
    vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise ValueError("empty list")
    return vals


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _choice(*options):
    def conv(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return text
    conv.options = options
    return conv


def _phi_spec(text: str) -> str:
    kind, sep, arg = text.partition(":")
    if not sep or kind not in ("sin", "coslike", "file") or not arg:
        raise ValueError(f"expected sin:<k>, coslike:<k> or file:<path>, got {text!r}")
    if kind != "file":
        k = int(arg)
        if k < 1 or (kind == "coslike" and k % 2):
            raise ValueError(f"{kind} needs a {'positive even' if kind == 'coslike' else 'positive'} index, got {arg!r}")
    return text


def _a_spec(text: str) -> str:
    kind, sep, arg = text.partition(":")
    if text == "zero":
        return text
    if kind == "const" and sep:
        _finite_float(arg)
        return text
    if kind == "file" and arg:
        return text
    raise ValueError(f"expected zero, const:<v> or file:<path>, got {text!r}")


@dataclass(frozen=True)
class Option:
    convert: object
    default: object
    help: str
    flag: bool = False


OPTIONS = {
    "length": Option(_positive_float, None, "crack length l"),
    "height": Option(_positive_float, None, "half height y0 of the rectangle"),
    "x0": Option(_finite_float, 0.0, "left end of the crack"),
    "nx": Option(_grid_size, 257, "grid nodes along the crack"),
    "ny": Option(_grid_size, 257, "grid nodes across each half, crack to outer edge"),
    "alpha": Option(_positive_float, 1.0, "slope of the background state above the crack"),
    "beta": Option(_positive_float, 1.0, "slope (negated) of the background state below the crack"),
    "a": Option(_a_spec, "zero", "coefficient a: zero, const:<v> or file:<path> with nx nodal values"),
    "phi": Option(_phi_spec, "coslike:2", "crack function: sin:<k>, coslike:<k> (k even) or file:<path> with nx nodal values"),
    "basis_size": Option(_positive_int, None, "Galerkin basis size of the grid method (default min(32, nx - 2))"),
    "modes_count": Option(_positive_int, 64, "number of modes of the mode method"),
    "h": Option(_positive_float, None, "finite-difference step (default 1e-3 t_max)"),
    "cutoff": Option(_positive_float, None, "half-width of the flow cut-off (default height/2)"),
    "format": Option(_choice("json", "csv"), "json", "output format"),
    "out": Option(str, None, "write output to this file instead of stdout"),
    "dual": Option(_bool, False, "also compute the dual capacity mu", flag=True),
    "ell": Option(_float_list, None, "lengths: a,b,c or start:stop:count"),
    "y0": Option(_float_list, None, "half heights: a,b,c or start:stop:count"),
    "workers": Option(_positive_int, 1, "worker processes"),
    "spacing": Option(_positive_float, None, "fixed grid spacing (overrides nx, ny)"),
    "contour_out": Option(str, None, "write the threshold contour y0,ell_star as CSV to this file"),
    "n_max": Option(_positive_int, 10_001, "last odd index summed exactly"),
    "n_samples": Option(_positive_int, 64, "sample points between lambda1 and the first pole"),
    "tol": Option(_positive_float, None, "classification tolerance on |lambda1 - 1|"),
    "criteria": Option(_int_list, None, "comma-separated criterion numbers (default all)"),
    "seedless": Option(_bool, False, "accepted for compatibility; the core never draws random numbers", flag=True),
}

LAMBDA1_CSV = "lambda1,mu,reciprocity,residual_strong,method,basis_size"
SCAN_CSV = "ell,y0,lambda1,stable,method"

COMMANDS = {
    "lambda1": dict(
        help="largest eigenvalue of T",
        options=("length", "height", "x0", "nx", "ny", "alpha", "beta", "a", "method", "modes_count",
                 "basis_size", "dual", "format", "out", "seedless"),
        required=("length", "height"),
        methods=("analytic", "grid", "modes"), method_default="grid",
        epilog=f"CSV columns: {LAMBDA1_CSV}",
    ),
    "second-variation": dict(
        help="term-by-term second variation at one crack function",
        options=("length", "height", "x0", "nx", "ny", "alpha", "beta", "a", "phi", "h", "cutoff",
                 "format", "out", "seedless"),
        required=("length", "height"),
        epilog="CSV columns: boundary_term,gradient_term,a_term,total,fd_second,fd_first",
    ),
    "fd-check": dict(
        help="finite differences of the energy against the analytic variations",
        options=("length", "height", "x0", "nx", "ny", "alpha", "beta", "phi", "h", "cutoff", "format",
                 "out", "seedless"),
        required=(),
        defaults={"length": 1.0, "height": 1.0},
        epilog="CSV columns: g0,g1,g2,first_variation,second_variation,g1_error,g2_rel_error,h,t_max,"
               "cutoff_width,passed. Exit 1 if the check fails.",
    ),
    "dual": dict(
        help="dual capacity mu and the product lambda1 mu",
        options=("length", "height", "x0", "nx", "ny", "alpha", "beta", "a", "method", "basis_size",
                 "format", "out", "seedless"),
        required=("length", "height"),
        methods=("analytic", "grid"), method_default="analytic",
        epilog="CSV columns: mu,lambda1,reciprocity,method,basis_size",
    ),
    "classify": dict(
        help="sign of the second variation at a critical pair",
        options=("length", "height", "x0", "nx", "ny", "alpha", "beta", "a", "method", "tol",
                 "basis_size", "modes_count", "format", "out", "seedless"),
        required=("length", "height"),
        methods=("analytic", "grid", "modes"), method_default="grid",
        epilog="CSV columns: classification,label,lambda1,method,tol,witness_total",
    ),
    "scan": dict(
        help="lambda1 over a grid of (ell, y0)",
        options=("ell", "y0", "method", "nx", "ny", "basis_size", "modes_count", "workers", "spacing",
                 "contour_out", "format", "out", "seedless"),
        required=("ell", "y0"),
        methods=stability.METHODS, method_default="analytic",
        defaults={"format": "csv"},
        epilog=f"CSV columns: {SCAN_CSV}; contour file columns: y0,ell_star",
    ),
    "series": dict(
        help="certify that the odd-branch series has no root above lambda1",
        options=("length", "height", "n_max", "n_samples", "format", "out", "seedless"),
        required=("length", "height"),
        epilog="CSV columns: length,half_height,lambda1,pole1,g_at_lambda1,g_at_lambda1_bound,nondecreasing,"
               "negative_above_pole,verdict,x,lhs,rhs,ok. Exit 1 on verdict FAIL.",
    ),
    "verify": dict(
        help="run the acceptance criteria and print a pass/fail table",
        options=("criteria", "out", "seedless"),
        required=(),
        epilog="Exit 0 iff every selected criterion passes; --out writes the detailed results as JSON.",
    ),
}


# ---------------------------------------------------------------------------
# parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message, self)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crackstab", description="Second-variation and stability computations for a straight crack.")
    parser.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    for name, spec in COMMANDS.items():
        p = sub.add_parser(name, help=spec["help"], description=spec["help"], epilog=spec.get("epilog"))
        p.add_argument("--config", default=None, help="flat key = value file; flags take precedence")
        for opt in spec["options"]:
            flag = "--" + opt.replace("_", "-")
            if opt == "method":
                p.add_argument(flag, dest=opt, default=None, choices=spec["methods"],
                               help=f"method (default {spec['method_default']})")
                continue
            o = OPTIONS[opt]
            default = spec.get("defaults", {}).get(opt, o.default)
            text = f"{o.help} (default {default})" if default is not None else o.help
            if opt in spec["required"]:
                text += " [required]"
            if o.flag:
                p.add_argument(flag, dest=opt, default=None, action="store_const", const="true", help=text)
            else:
                p.add_argument(flag, dest=opt, default=None, help=text)
        p.set_defaults(_subparser=p)
    return parser


def resolve(command: str, flags: dict, config: dict) -> dict:
    """Merge flags over config over defaults and convert every value."""
    spec = COMMANDS[command]
    unknown = sorted(set(config) - set(spec["options"]))
    if unknown:
        raise UsageError(f"config keys not used by {command}: {', '.join(unknown)}")
    out = {}
    for opt in spec["options"]:
        raw = flags.get(opt)
        if raw is None:
            raw = config.get(opt)
        if opt == "method":
            if raw is None:
                raw = spec["method_default"]
            if raw not in spec["methods"]:
                raise UsageError(f"--method must be one of {', '.join(spec['methods'])}, got {raw!r}")
            out[opt] = raw
            continue
        o = OPTIONS[opt]
        if raw is None:
            value = spec.get("defaults", {}).get(opt, o.default)
            if value is None and opt in spec["required"]:
                raise UsageError(f"the following arguments are required: --{opt.replace('_', '-')}")
        else:
            try:
                value = o.convert(raw)
            except ValueError as exc:
                raise UsageError(f"--{opt.replace('_', '-')}: {exc}") from exc
        out[opt] = value
    return out


# ---------------------------------------------------------------------------
# inputs


def _load_nodal(path: str, domain: CrackedRectangle, what: str) -> np.ndarray:
    try:
        values = np.loadtxt(path, dtype=float, ndmin=1).ravel()
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read {what} values from {path}: {exc}") from exc
    if values.size != domain.nx:
        raise UsageError(f"{what} file {path} holds {values.size} values; the crack has nx = {domain.nx} nodes")
    return values


def _domain(p: dict) -> CrackedRectangle:
    return CrackedRectangle(p["length"], p["height"], p["x0"], p["nx"], p["ny"])


def _basis(p: dict, domain: CrackedRectangle, default: int = 32) -> int:
    return p["basis_size"] if p.get("basis_size") is not None else min(default, domain.nx - 2)


def coefficient_from_spec(spec: str, domain: CrackedRectangle) -> CoefficientA:
    if spec == "zero":
        return CoefficientA.zero()
    kind, _, arg = spec.partition(":")
    if kind == "const":
        return CoefficientA.constant(float(arg))
    return CoefficientA.from_values(_load_nodal(arg, domain, "coefficient a"))


def phi_from_spec(spec: str, domain: CrackedRectangle) -> CrackFunction:
    kind, _, arg = spec.partition(":")
    if kind == "file":
        return CrackFunction.from_nodes(domain, _load_nodal(arg, domain, "phi"), tol=1e-9)
    return make_phi(domain, spec)


# ---------------------------------------------------------------------------
# output


def _scalar(v) -> bool:
    return v is None or isinstance(v, (bool, int, float, str, enum.Enum, np.generic))


def _cell(v) -> str:
    v = to_jsonable(v)
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def csv_single(record: dict) -> str:
    """Header and one row from the scalar entries of ``record``."""
    keys = [k for k, v in record.items() if _scalar(v)]
    return ",".join(keys) + "\n" + ",".join(_cell(record[k]) for k in keys) + "\n"


def _record(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        Path(out).write_text(text)


def _write(report, p: dict, csv_record: dict | None = None) -> None:
    if p.get("format", "json") == "csv":
        _emit(csv_single(csv_record if csv_record is not None else _record(report)), p.get("out"))
    else:
        _emit(dumps(report), p.get("out"))


# ---------------------------------------------------------------------------
# commands


def cmd_lambda1(p: dict) -> int:
    domain = _domain(p)
    slopes = SlopeConfig(p["alpha"], p["beta"])
    a = coefficient_from_spec(p["a"], domain)
    if p["method"] != "grid" and not a.is_zero:
        raise UsageError(f"--method {p['method']} supports only --a zero")
    if p["method"] == "analytic":
        report = lambda1_analytic(domain, slopes)
    elif p["method"] == "modes":
        report = lambda1_modes(domain, slopes, p["modes_count"])
    else:
        report = lambda1_grid(domain, slopes, a, _basis(p, domain))
    if p["dual"]:
        report = report.with_dual(dual_mu(domain, slopes, a))
    _write(report, p, {k: getattr(report, k) for k in LAMBDA1_CSV.split(",")})
    return EXIT_OK


def cmd_second_variation(p: dict) -> int:
    domain = _domain(p)
    slopes = SlopeConfig(p["alpha"], p["beta"])
    a = coefficient_from_spec(p["a"], domain)
    phi = phi_from_spec(p["phi"], domain)
    report = quadratic_form(domain, phi, slopes, a, params={"phi": p["phi"]})
    if p["h"] is not None:
        flow = build_flow(domain, phi, p["cutoff"] or 0.5 * domain.half_height)
        rich = fd_richardson(domain, flow, slopes, p["h"])
        report = dataclasses.replace(report, fd_second=rich.g2, fd_first=rich.g1,
                                     params={**report.params, "h": p["h"], "cutoff": flow.cutoff_width})
    _write(report, p)
    return EXIT_OK


def cmd_fd_check(p: dict) -> int:
    domain = _domain(p)
    slopes = SlopeConfig(p["alpha"], p["beta"])
    phi = phi_from_spec(p["phi"], domain)
    report = fd_check(domain, phi, slopes, p["h"], p["cutoff"])
    report = dataclasses.replace(report, params={**report.params, "phi": p["phi"]})
    _write(report, p)
    if not report.passed:
        logger.error("fd-check failed: g1 error %.3g, g2 relative error %.3g", report.g1_error, report.g2_rel_error)
        return EXIT_CHECK_FAILED
    return EXIT_OK


@dataclass(frozen=True)
class DualReport:
    mu: float
    lambda1: float
    reciprocity: float
    method: str
    basis_size: int
    params: dict


def cmd_dual(p: dict) -> int:
    domain = _domain(p)
    slopes = SlopeConfig(p["alpha"], p["beta"])
    a = coefficient_from_spec(p["a"], domain)
    basis = _basis(p, domain, 16)
    mu = dual_mu(domain, slopes, a, basis)
    if p["method"] == "analytic":
        if not a.is_zero:
            raise UsageError("--method analytic supports only --a zero")
        lam = lambda1_analytic(domain, slopes).lambda1
    else:
        lam = lambda1_grid(domain, slopes, a, _basis(p, domain)).lambda1
    params = {"length": domain.length, "height": domain.half_height, "x0": domain.x0, "nx": domain.nx,
              "ny": domain.ny, "alpha": slopes.alpha, "beta": slopes.beta, "a": a.describe()}
    _write(DualReport(mu, lam, lam * mu, p["method"], basis, params), p)
    return EXIT_OK


def cmd_classify(p: dict) -> int:
    domain = _domain(p)
    slopes = SlopeConfig(p["alpha"], p["beta"])
    a = coefficient_from_spec(p["a"], domain)
    report = classify(domain, slopes, a, p["method"], p["tol"], _basis(p, domain), p["modes_count"])
    _write(report, p)
    return EXIT_OK


def cmd_scan(p: dict) -> int:
    config = stability.ScanConfig(p["method"], p["nx"], p["ny"], p["basis_size"] or 24, p["modes_count"],
                                  workers=p["workers"], spacing=p["spacing"])
    rows = stability.scan_lambda1(p["ell"], p["y0"], config)
    if p["format"] == "csv":
        _emit(stability.to_csv(rows, tuple(SCAN_CSV.split(","))), p["out"])
    else:
        _emit(dumps(rows), p["out"])
    if p["contour_out"]:
        Path(p["contour_out"]).write_text(stability.to_csv(stability.threshold_contour(p["y0"])))
    return EXIT_OK


@dataclass(frozen=True)
class SeriesReport:
    no_root: closedform.NoRootReport
    inequality: closedform.InequalityWitness
    verdict: str


def cmd_series(p: dict) -> int:
    ell, y0 = p["length"], p["height"]
    no_root = closedform.no_root_check(ell, y0, p["n_samples"], p["n_max"])
    witness = closedform.inequality_witness(math.pi * y0 / ell)
    verdict = "PASS" if no_root.passed and witness.ok else "FAIL"
    report = SeriesReport(no_root, witness, verdict)
    record = {k: v for k, v in _record(no_root).items() if k != "verdict"}
    record.update({k: getattr(witness, k) for k in ("x", "lhs", "rhs", "ok")})
    record["verdict"] = verdict
    _write(report, p, record)
    return EXIT_OK if verdict == "PASS" else EXIT_CHECK_FAILED


def cmd_verify(p: dict) -> int:
    selection = p["criteria"]
    if selection:
        bad = sorted(set(selection) - set(range(1, 12)))
        if bad:
            raise UsageError(f"unknown criteria: {bad}")
    results = run_all(selection, AcceptanceContext(), stream=sys.stdout)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed", flush=True)
    if p["out"]:
        Path(p["out"]).write_text(dumps(results))
    return EXIT_OK if passed == len(results) else EXIT_CHECK_FAILED


HANDLERS = {
    "lambda1": cmd_lambda1,
    "second-variation": cmd_second_variation,
    "fd-check": cmd_fd_check,
    "dual": cmd_dual,
    "classify": cmd_classify,
    "scan": cmd_scan,
    "series": cmd_series,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    sub = parser
    try:
        args = parser.parse_args(argv)
        sub = args._subparser
        logging.basicConfig(level=args.log_level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
        config = load_config(args.config) if args.config else {}
        params = resolve(args.command, vars(args), config)
        return HANDLERS[args.command](params)
    except UsageError as exc:
        target = exc.args[1] if len(exc.args) > 1 else sub
        target.print_usage(sys.stderr)
        print(f"crackstab: error: {exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, np.linalg.LinAlgError) as exc:
        print(f"crackstab: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"crackstab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
