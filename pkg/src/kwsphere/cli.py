"""Command-line front end.

Exit codes for ``analyze`` and ``gyre-classify``: 0 existence established,
1 no solution, 2 inconclusive/unknown. ``solve`` and ``gyre-solve`` exit 0
on convergence and 3 otherwise. Usage and input errors exit 64.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import criteria, gyre, solver
from .grid import ScalarField, atomic_write_text, build_grid, read_field, write_field
from .harmonics import real_harmonic

EX_USAGE = 64
EX_NOT_CONVERGED = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _finite(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be finite: {text!r}")
    return v


def _grid_flags(p):
    p.add_argument("--nlat", type=int, default=None, help="colatitude nodes (default 64)")
    p.add_argument("--nlon", type=int, default=None, help="longitude nodes (default 2*nlat)")
    p.add_argument("--L", type=int, default=None, help="spectral degree (default nlat-1)")


def _h_flags(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--h-file", help="candidate curvature as a sphfield file")
    src.add_argument("--h-expr", help="builtin: const:<v> | gyre:c=..,d=..,g=..,omega=.. "
                                      "| harmonic:<l>,<m> | file:<path>")
    p.add_argument("--C", type=_finite, required=True)


def _solver_flags(p):
    p.add_argument("--max-iters", type=int, default=50)
    p.add_argument("--tol", type=_finite, default=1e-10)
    p.add_argument("--damping", type=_finite, default=1.0)
    p.add_argument("--initial-guess", default="auto",
                   help="auto | zero | <constant>")
    p.add_argument("--out", help="write the solution field here (+ .json metadata)")


def _resolve_grid(args, file_grid=None):
    nlat, nlon = args.nlat, args.nlon
    if file_grid is not None:
        if (nlat is not None and nlat != file_grid.nlat) or (
                nlon is not None and nlon != file_grid.nlon):
            raise UsageError("grid flags conflict with the field file's grid")
        grid = file_grid
    else:
        nlat = 64 if nlat is None else nlat
        nlon = 2 * nlat if nlon is None else nlon
        try:
            grid = build_grid(nlat, nlon)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    L = getattr(args, "L", None)
    if L is not None and not 0 <= L <= grid.lmax:
        raise UsageError(f"--L must lie in [0, {grid.lmax}] for this grid")
    return grid


def _parse_kv(body: str) -> dict:
    out = {}
    for item in body.split(","):
        if "=" not in item:
            raise UsageError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = _finite(v)
        except argparse.ArgumentTypeError as exc:
            raise UsageError(str(exc)) from None
    return out


def _load_field(path) -> ScalarField:
    try:
        return read_field(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(f"malformed field file {path}: {exc}") from None


def load_h(args):
    """Return ``(h, gyre_params_or_None)`` from ``--h-file``/``--h-expr``."""
    if args.h_file:
        h = _load_field(args.h_file)
        _resolve_grid(args, h.grid)
        return h, None
    kind, _, body = args.h_expr.partition(":")
    if kind == "file":
        h = _load_field(body)
        _resolve_grid(args, h.grid)
        return h, None
    grid = _resolve_grid(args)
    if kind == "const":
        try:
            v = _finite(body)
        except argparse.ArgumentTypeError as exc:
            raise UsageError(str(exc)) from None
        return ScalarField(grid, np.full(grid.shape, v)), None
    if kind == "gyre":
        kv = _parse_kv(body)
        missing = {"c", "d", "omega"} - kv.keys()
        if missing:
            raise UsageError(f"gyre expression missing {sorted(missing)}")
        try:
            p = gyre.GyreParams(kv["c"], kv["d"], kv.get("g", 0.0), kv["omega"])
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        return gyre.to_elliptic(p, grid)[1], p
    if kind == "harmonic":
        try:
            l, m = (int(t) for t in body.split(","))
            return real_harmonic(grid, l, m), None
        except ValueError as exc:
            raise UsageError(f"bad harmonic expression {body!r}: {exc}") from None
    raise UsageError(f"unknown h expression {args.h_expr!r}")


def _emit(text: str, path=None):
    if path:
        atomic_write_text(path, text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _solver_config(args):
    guess = args.initial_guess
    if guess not in ("auto", "zero"):
        try:
            guess = _finite(guess)
        except argparse.ArgumentTypeError as exc:
            raise UsageError(str(exc)) from None
    try:
        return solver.SolverConfig(L=args.L, max_iters=args.max_iters, tol=args.tol,
                                   damping=args.damping, initial_guess=guess)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _gyre_params(args):
    try:
        return gyre.GyreParams(args.c, args.d, args.g, args.omega)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_analyze(args):
    h, gp = load_h(args)
    if not np.any(h.values != 0):
        raise UsageError("h must not vanish identically")
    kernels = None
    if gp is not None:
        # Closed forms carry exact pole values for the gap.
        gp = gyre.GyreParams(gp.c, gp.d, args.C / gp.d, gp.omega)
        kernels = gyre.kernels_closed(gp, h.grid)
    report = criteria.classify(h, args.C, margin=args.margin, kernels=kernels)
    _emit(report.to_json(), args.out)
    return report.verdict.exit_code


def cmd_gyre_classify(args):
    p = _gyre_params(args)
    rv = gyre.classify(p)
    doc = {"c": p.c, "d": p.d, "g": p.g, "omega": p.omega, "C": p.C, "varpi": p.varpi}
    doc.update(rv.to_dict())
    _emit(_dump(doc), args.out)
    return rv.verdict.exit_code


def cmd_gyre_sweep(args):
    n_v = args.steps if args.steps_varpi is None else args.steps_varpi
    if args.steps < 2 or n_v < 2:
        raise UsageError("--steps must be >= 2")
    if args.cd_sign == 0:
        raise UsageError("--cd-sign must be nonzero")
    res = gyre.sweep((args.C_min, args.C_max), (args.varpi_min, args.varpi_max),
                     (args.steps, n_v), cd_sign=args.cd_sign)
    _emit(res.to_csv(), args.out)
    if args.svg:
        res.write_svg(args.svg)
    return 0


def _report_solution(meta, field, out):
    if out:
        write_field(field, out)
        atomic_write_text(f"{out}.json", _dump(meta))
    sys.stdout.write(_dump(meta))


def cmd_solve(args):
    cfg = _solver_config(args)
    h, _ = load_h(args)
    if not np.any(h.values != 0):
        raise UsageError("h must not vanish identically")
    sol = solver.solve(h, args.C, cfg)
    _report_solution(sol.metadata(), sol.u, args.out)
    return 0 if sol.converged else EX_NOT_CONVERGED


def cmd_gyre_solve(args):
    cfg = _solver_config(args)
    p = _gyre_params(args)
    grid = _resolve_grid(args)
    gs = solver.gyre_solve(p, grid, cfg)
    _report_solution(gs.metadata(), gs.psi, args.out)
    return 0 if gs.converged else EX_NOT_CONVERGED


def cmd_check_kw(args):
    u = _load_field(args.solution)
    h, _ = load_h(args)
    if h.grid != u.grid:
        raise UsageError("solution and h live on different grids")
    try:
        r = criteria.kw_residuals(u, h, args.C)
    except OverflowError as exc:
        raise UsageError(str(exc)) from None
    doc = {"C": args.C, "kw_residuals": [float(v) for v in r], "norm": float(np.linalg.norm(r))}
    _emit(_dump(doc), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="kwsphere", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="existence criteria for lap u = C - h e^u")
    _h_flags(p)
    _grid_flags(p)
    p.add_argument("--margin", type=_finite, default=None,
                   help="relative margin for strict sign tests (default 1e-8)")
    p.add_argument("--out", help="report path (default stdout)")
    p.set_defaults(func=cmd_analyze)

    for name, func in (("gyre-classify", cmd_gyre_classify), ("gyre-solve", cmd_gyre_solve)):
        p = sub.add_parser(name)
        for flag in ("--c", "--d", "--g", "--omega"):
            p.add_argument(flag, type=_finite, required=True)
        if name == "gyre-solve":
            _grid_flags(p)
            _solver_flags(p)
        else:
            p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("gyre-sweep", help="tabulate the gyre classification as CSV")
    p.add_argument("--C-min", type=_finite, required=True)
    p.add_argument("--C-max", type=_finite, required=True)
    p.add_argument("--varpi-min", type=_finite, required=True)
    p.add_argument("--varpi-max", type=_finite, required=True)
    p.add_argument("--steps", type=int, required=True, help="points per axis")
    p.add_argument("--steps-varpi", type=int, default=None)
    p.add_argument("--cd-sign", type=_finite, default=-1.0)
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--svg", help="also write an SVG region map")
    p.set_defaults(func=cmd_gyre_sweep)

    p = sub.add_parser("solve", help="Newton solve of lap u = C - h e^u")
    _h_flags(p)
    _grid_flags(p)
    _solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check-kw", help="Kazdan-Warner residuals of a stored solution")
    p.add_argument("--solution", required=True)
    _h_flags(p)
    _grid_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_check_kw)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"kwsphere {args.command}: error: {exc}\n")
        return EX_USAGE


if __name__ == "__main__":
    sys.exit(main())
