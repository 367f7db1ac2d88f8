"""Command-line interface: ``selectrelax solve|split|scan|sweep|run``.

Exit status is 0 on success, 1 on a usage error and 2 when the numerics
did not converge. Floats are written with ``%.12e``; the JSON and CSV
forms of one run carry identical numbers.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .analysis import (CLUSTER_RTOL, FitError, observed_orders, scan_spectrum, split_sweep,
                       splitting)
from .analysis import dx_sweep as _dx_sweep
from .bandsolver import SingularMatrixError
from .grid import DomainTooSmallError
from .potentials import DoubleWell, NoTurningPointError, OutOfRangeError, parse_potential
from .relax import AsymmetricGridError, RelaxConfig, auto_domain, relax

__all__ = ["main", "build_parser", "Report", "parse_jobfile", "UsageError", "JOB_KEYS"]

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED = 0, 1, 2
FLOAT_FMT = "%.12e"


class UsageError(Exception):
    """Bad flags, malformed values or an impossible run description."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class Report:
    """Scalars plus named tables, rendered as one JSON object or as CSV."""

    scalars: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)

    def add_table(self, name, columns, rows):
        self.tables[name] = (list(columns), [list(r) for r in rows])


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % v if math.isfinite(v) else str(float(v)).lower()
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(FLOAT_FMT % v) if math.isfinite(v) else None
    return v


def render_json(report: Report) -> str:
    obj = {k: _json_value(v) for k, v in report.scalars.items()}
    for name, (cols, rows) in report.tables.items():
        obj[name] = {c: [_json_value(r[i]) for r in rows] for i, c in enumerate(cols)}
    return json.dumps(obj, indent=2) + "\n"


def render_csv(report: Report) -> str:
    """Each table as a header plus rows; the scalars follow as a final
    one-row block. Blocks are separated by a blank line."""
    blocks = []
    for cols, rows in report.tables.values():
        lines = [",".join(cols)] + [",".join(_fmt(v) for v in r) for r in rows]
        blocks.append("\n".join(lines))
    if report.scalars:
        blocks.append(",".join(report.scalars) + "\n"
                      + ",".join(_fmt(v) for v in report.scalars.values()))
    return "\n\n".join(blocks) + "\n"


def _emit(report: Report, args) -> None:
    text = render_csv(report) if args.format == "csv" else render_json(report)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _floats(text: str, name: str, count: int | None = None) -> list[float]:
    try:
        vals = [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise UsageError(f"{name}: expected comma-separated numbers, got {text!r}") from None
    if count is not None and len(vals) != count:
        raise UsageError(f"{name}: expected {count} values, got {len(vals)}")
    if not all(math.isfinite(v) for v in vals):
        raise UsageError(f"{name}: values must be finite")
    return vals


def _domain(text: str | None):
    if text is None or text.strip().lower() == "auto":
        return None
    lo, hi = _floats(text, "--domain", 2)
    if not lo < hi:
        raise UsageError("--domain needs lo < hi")
    return lo, hi


def _dt(text: str):
    if text.strip().lower() == "auto":
        return "auto"
    (v,) = _floats(text, "--dt", 1)
    if not v > 0:
        raise UsageError("--dt must be positive or 'auto'")
    return v


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive, got {text!r}")
    return v


def _finite(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError("must be finite")
    return v


def _count(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _options(args) -> dict:
    return dict(dt=_dt(args.dt), max_iter=args.max_iter, residual_tol=args.residual_tol,
                scheme=args.scheme, kinetic=args.kinetic)


def _potential(args):
    try:
        return parse_potential(args.potential)
    except (ValueError, OSError) as exc:
        raise UsageError(f"--potential: {exc}") from None


def _run_row(r):
    return dict(E=r.E, E_rel=r.E_rel, residual=r.residual, iterations=r.iterations,
                converged=r.converged, dt_used=r.dt_used, stability_bound=r.stability_bound)


def cmd_solve(args) -> int:
    spec = _potential(args)
    config = RelaxConfig(E=args.E, dx=args.dx, domain=_domain(args.domain),
                         parity=args.parity, **_options(args))
    r = relax(config, spec)
    report = Report(_run_row(r))
    report.scalars.update(J=r.grid.J, dx=r.grid.dx, x_min=r.grid.x_min, x_max=r.grid.x_max,
                          h_residual=r.h_residual)
    _emit(report, args)
    if args.psi_out:
        with open(args.psi_out, "w", newline="") as fh:
            fh.write("x,psi\n")
            for x, p in zip(r.grid.x_full, r.psi.with_boundary()):
                fh.write(f"{FLOAT_FMT % x},{FLOAT_FMT % p}\n")
    return EXIT_OK if r.converged else EXIT_NONCONVERGED


def _dx_list(args) -> list[float]:
    vals = _floats(args.dx_list, "--dx-list")
    if any(v <= 0 for v in vals):
        raise UsageError("--dx-list values must be positive")
    return vals


def cmd_split(args) -> int:
    if args.lam is None:
        raise UsageError("split needs --lambda")
    if (args.dx is None) == (args.dx_list is None):
        raise UsageError("split needs exactly one of --dx and --dx-list")
    try:
        spec = DoubleWell(args.lam)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    guess = "auto" if args.E is None else args.E
    domain = _domain(args.domain)
    opts = _options(args)
    if args.dx is not None:
        s = splitting(spec, args.dx, domain, guess, **opts)
        report = Report(dict(
            **{"lambda": args.lam}, dx=s.dx, E_guess=s.E_guess, E0_rel=s.E0_rel,
            E1_rel=s.E1_rel, T_rel=s.T_rel, residual_even=s.even.residual,
            residual_odd=s.odd.residual, iterations_even=s.even.iterations,
            iterations_odd=s.odd.iterations, converged=s.converged))
        _emit(report, args)
        return EXIT_OK if s.converged else EXIT_NONCONVERGED
    dxs = _dx_list(args)
    if args.fit and len(set(dxs)) < 3:
        raise UsageError("--fit needs at least 3 distinct --dx-list values")
    try:
        sw = split_sweep(spec, dxs, domain, guess, jobs=args.jobs, **opts)
        fit = (sw.fit_intercept, sw.fit_slope, sw.fit_residual_rms)
        runs, dx_sorted, ok = sw.runs, sw.dx_values, sw.converged
    except FitError as exc:
        if args.fit:
            print(f"selectrelax: {exc}", file=sys.stderr)
            return EXIT_NONCONVERGED
        dx_sorted = np.array(sorted(set(dxs), reverse=True))
        runs = [splitting(spec, float(d), domain, guess, **opts) for d in dx_sorted]
        ok = np.array([r.converged for r in runs])
        fit = None
    report = Report({"lambda": args.lam})
    report.add_table("splittings", ["dx", "E0_rel", "E1_rel", "T_rel", "converged"],
                     [(d, r.E0_rel, r.E1_rel, r.T_rel, r.converged) for d, r in zip(dx_sorted, runs)])
    if args.fit and fit is not None:
        report.scalars.update(fit_intercept=fit[0], fit_slope=fit[1], fit_residual_rms=fit[2])
    _emit(report, args)
    return EXIT_OK if ok.all() else EXIT_NONCONVERGED


def cmd_scan(args) -> int:
    spec = _potential(args)
    lo, hi = _floats(args.E_range, "--E-range", 2)
    if not lo < hi:
        raise UsageError("--E-range needs lo < hi")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        scan = scan_spectrum(spec, (lo, hi), args.points, args.dx, _domain(args.domain),
                             rtol=args.cluster_rtol, jobs=args.jobs, parity=args.parity,
                             **_options(args))
    for w in caught:
        print(f"selectrelax: warning: {w.message}", file=sys.stderr)
    report = Report(dict(points=len(scan.points), levels=len(scan.clusters),
                         converged_fraction=scan.converged_fraction))
    report.add_table("points", ["E_scan", "E_rel", "residual", "converged", "cluster_id"],
                     [(p.E, p.E_rel, p.residual, p.converged, p.cluster) for p in scan.points])
    report.add_table("clusters", ["cluster_id", "E_n", "gamma_lo", "gamma_hi", "members"],
                     [(i, c.E_n, c.gamma_lo, c.gamma_hi, c.members)
                      for i, c in enumerate(scan.clusters)])
    _emit(report, args)
    return EXIT_OK if scan.converged_fraction >= 0.8 else EXIT_NONCONVERGED


def cmd_sweep(args) -> int:
    spec = _potential(args)
    dxs = _dx_list(args)
    if len(set(dxs)) < 3:
        raise UsageError("sweep needs at least 3 distinct --dx-list values")
    config = RelaxConfig(E=args.E, dx=max(dxs), domain=_domain(args.domain),
                         parity=args.parity, **_options(args))
    if config.domain is None:
        # one interval for every dx so only the lattice step changes
        config = replace(config, domain=auto_domain(spec, args.E))
    try:
        sw = _dx_sweep(config, spec, dxs, jobs=args.jobs)
    except FitError as exc:
        print(f"selectrelax: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    ref = sw.fit_intercept if args.reference is None else args.reference
    m = sw.converged
    orders = observed_orders(sw.dx_values[m], sw.values[m], ref)
    order_col = iter(list(orders) + [math.nan])
    report = Report(dict(E=args.E, fit_intercept=sw.fit_intercept, fit_slope=sw.fit_slope,
                         fit_residual_rms=sw.fit_residual_rms, reference=ref,
                         mean_order=float(np.mean(orders)) if len(orders) else math.nan))
    rows = []
    for d, v, r, ok in zip(sw.dx_values, sw.values, sw.runs, m):
        rows.append((d, v, r.residual, r.iterations, ok, next(order_col) if ok else math.nan))
    report.add_table("sweep", ["dx", "E_rel", "residual", "iterations", "converged", "order"], rows)
    _emit(report, args)
    return EXIT_OK if m.all() else EXIT_NONCONVERGED


JOB_KEYS = {
    "command", "potential", "lambda", "E", "E_range", "points", "dx", "dx_list", "domain",
    "parity", "dt", "scheme", "kinetic", "max_iter", "residual_tol", "format", "out",
    "psi_out", "fit", "jobs", "reference", "cluster_rtol",
}


def parse_jobfile(text: str) -> list[str]:
    """Turn ``key = value`` lines into an argument vector.

    ``#`` starts a comment. Unknown or repeated keys are rejected before
    anything runs.
    """
    seen = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"job file line {n}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in JOB_KEYS:
            raise UsageError(f"job file line {n}: unknown key {key!r}")
        if key in seen:
            raise UsageError(f"job file line {n}: duplicate key {key!r}")
        seen[key] = value
    if "command" not in seen:
        raise UsageError("job file needs a 'command' key")
    command = seen.pop("command")
    if command not in ("solve", "split", "scan", "sweep"):
        raise UsageError(f"job file: unknown command {command!r}")
    argv = [command]
    for key, value in seen.items():
        flag = "--" + key.replace("_", "-")
        if key == "fit":
            if value.lower() in ("true", "yes", "1"):
                argv.append(flag)
            elif value.lower() not in ("false", "no", "0"):
                raise UsageError("job file: fit must be true or false")
            continue
        argv.append(f"{flag}={value}")
    return argv


def cmd_run(args) -> int:
    try:
        with open(args.jobfile) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read job file: {exc}") from None
    argv = parse_jobfile(text)
    return _dispatch(build_parser().parse_args(argv))


def _common(p, *, potential=True, E=False, dx=True, max_iter=10):
    if potential:
        p.add_argument("--potential", required=True,
                       help="morse:mu=0.2 | dwell:lambda=15 | harmonic:omega=1 | table:file.csv")
    if E:
        p.add_argument("--E", type=_finite, required=True, help="selecting energy")
    if dx:
        p.add_argument("--dx", type=_positive, required=True, help="lattice step")
    p.add_argument("--domain", default="auto", help="lo,hi or auto")
    p.add_argument("--dt", default="auto", help="time step or auto")
    p.add_argument("--scheme", choices=("direct", "consistent"), default="direct")
    p.add_argument("--kinetic", choices=("three_point", "central"), default=None,
                   help="kinetic term of the energy estimate (default follows --scheme)")
    p.add_argument("--max-iter", type=_count, default=max_iter)
    p.add_argument("--residual-tol", type=_positive, default=1e-10)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None, help="output file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="selectrelax", description="Selective relaxation eigensolver.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("solve", help="relax once at a selecting energy")
    _common(p, E=True)
    p.add_argument("--parity", choices=("even", "odd", "none"), default="none")
    p.add_argument("--psi-out", default=None, help="write x,psi CSV including boundary nodes")

    p = sub.add_parser("split", help="double-well splitting T = E1 - E0")
    _common(p, potential=False, dx=False)
    p.add_argument("--lambda", dest="lam", type=_positive)
    p.add_argument("--E", type=_finite, default=None, help="selecting energy (default auto)")
    p.add_argument("--dx", type=_positive, default=None)
    p.add_argument("--dx-list", default=None, help="comma-separated lattice steps")
    p.add_argument("--fit", action="store_true", help="fit T_rel = a + b dx^2")
    p.add_argument("--jobs", type=_count, default=None)

    p = sub.add_parser("scan", help="relax over a range of selecting energies")
    # points near a basin edge contract slowly, so scans get a longer budget
    _common(p, max_iter=30)
    p.add_argument("--E-range", required=True, help="lo,hi")
    p.add_argument("--points", type=_count, default=64)
    p.add_argument("--parity", choices=("even", "odd", "none"), default="none")
    p.add_argument("--cluster-rtol", type=_positive, default=CLUSTER_RTOL)
    p.add_argument("--jobs", type=_count, default=None)

    p = sub.add_parser("sweep", help="one level over several lattice steps")
    _common(p, E=True, dx=False)
    p.add_argument("--dx-list", required=True, help="comma-separated lattice steps")
    p.add_argument("--parity", choices=("even", "odd", "none"), default="none")
    p.add_argument("--reference", type=_finite, default=None,
                   help="exact value for the observed orders (default: fit intercept)")
    p.add_argument("--jobs", type=_count, default=None)

    p = sub.add_parser("run", help="execute a key = value job file")
    p.add_argument("jobfile")
    return parser


_COMMANDS = {"solve": cmd_solve, "split": cmd_split, "scan": cmd_scan, "sweep": cmd_sweep,
             "run": cmd_run}


def _dispatch(args) -> int:
    return _COMMANDS[args.command](args)


_LIST_FLAGS = ("--E-range", "--domain", "--dx-list")


def _join_list_values(argv: list[str]) -> list[str]:
    """``--domain -12,100`` would read as an unknown option; glue list
    values that start with a minus sign onto their flag."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _LIST_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_join_list_values(argv))
        return _dispatch(args)
    except UsageError as exc:
        print(f"selectrelax: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainTooSmallError, AsymmetricGridError, NoTurningPointError, OutOfRangeError,
            SingularMatrixError, ValueError, TypeError) as exc:
        print(f"selectrelax: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
