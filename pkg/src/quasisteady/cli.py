"""Command-line front end.

Commands
--------
check            ellipticity, LS, the three ALS families and the multiplier bound scan
solve            solve for given data files or a manufactured solution
verify-estimate  maximal-regularity ratio check over a seeded ensemble
example          print a built-in problem file

Every command prints one JSON document on stdout (and optionally writes it
to ``--report``).  The exit status is 0 exactly when every verdict in that
document passes; invalid input gives status 2 and a JSON error on stderr.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .builtin import BUILTIN_IDS, builtin_spec, builtin_text
from .config import ConfigError, load_problem_spec
from .fieldio import FieldFormatError, atomic_write, read_field_binary, read_field_csv, write_field_binary, write_field_csv
from .halfspace import HalfSpaceSolver, SingularModeError, TangentialGrid, graded_heights
from .lopatinskii import BOUND_GRID, PreconditionError, ScanGrid, check_ALS, check_LS, multiplier_bound_scan
from .manufactured import laplace_dynamic_case
from .norms import EnsembleSpec, verify_max_regularity
from .reports import jsonable
from .symbols import InvariantError, check_ellipticity

__all__ = ["main", "build_parser", "run", "UsageError"]

# dynamic-law diffusion coefficient of the built-ins with a closed-form solution
_MANUFACTURED = {"1": 0.0, "2": 1.0}


class UsageError(Exception):
    """Invalid command-line input."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 2:
        raise argparse.ArgumentTypeError("counts must be >= 2")
    return value


def _nu_counts(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected RxPHI, e.g. 33x17")
    return _positive_int(parts[0]), _positive_int(parts[1])


def _theta(text: str) -> float:
    value = float(text)
    if not math.pi / 2 < value < math.pi:
        raise argparse.ArgumentTypeError("theta must lie in (pi/2, pi)")
    return value


def _eta(text: str) -> float:
    value = float(text)
    if not (value > 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError("eta must be positive")
    return value


def _problem_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--example", choices=BUILTIN_IDS, help="built-in problem id")
    src.add_argument("--config", type=Path, help="problem file")
    p.add_argument("--eta", type=_eta, help="override the problem's eta")
    p.add_argument("--report", type=Path, help="also write the JSON report here")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="quasisteady", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    chk = sub.add_parser("check", help="run the solvability checks")
    _problem_args(chk)
    chk.add_argument("--grid-zeta", type=_positive_int, default=33)
    chk.add_argument("--grid-nu", type=_nu_counts, default=(33, 17), metavar="RxPHI")
    chk.add_argument("--grid-eta", type=_positive_int, default=9)
    chk.add_argument("--theta", type=_theta, default=3 * math.pi / 4)
    chk.add_argument("--rel-threshold", type=float, default=1e-6)
    chk.add_argument("--bound-refinements", type=int, default=2)
    chk.add_argument("--no-bound", action="store_true", help="skip the multiplier bound scan")

    sol = sub.add_parser("solve", help="solve the half-space problem")
    _problem_args(sol)
    sol.add_argument("--manufactured", action="store_true", help="use the closed-form test solution")
    sol.add_argument("--K", type=int, default=16)
    sol.add_argument("--Nt", type=int, default=64)
    sol.add_argument("--T", type=float, default=1.0)
    sol.add_argument("--Y", type=float, help="height of the output strip (default 10/sqrt(eta))")
    sol.add_argument("--seed", type=int, default=0)
    sol.add_argument("--tolerance", type=float, default=1e-4, help="max-norm error bound for the manufactured verdict")
    sol.add_argument("--data-f", type=Path, help="interior source field")
    sol.add_argument("--data-g", type=Path, action="append", default=[], help="boundary data, one file per row block")
    sol.add_argument("--data-rho0", type=Path, help="initial value (first time slice of a boundary field)")
    sol.add_argument("--out-dir", type=Path, default=Path("."))
    sol.add_argument("--format", choices=("csv", "binary"), default="csv")

    ver = sub.add_parser("verify-estimate", help="maximal-regularity ratio check")
    _problem_args(ver)
    ver.add_argument("--ensemble-size", type=int, default=32)
    ver.add_argument("--K", type=int, default=16)
    ver.add_argument("--Nt", type=int, default=64)
    ver.add_argument("--band", type=int, default=8)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--tolerance", type=float, default=0.2)

    ex = sub.add_parser("example", help="print a built-in problem file")
    ex.add_argument("--example", choices=BUILTIN_IDS, required=True)
    ex.add_argument("--output", type=Path)
    return parser


def _load_spec(args):
    spec = builtin_spec(args.example) if args.example else load_problem_spec(args.config)
    return spec.with_eta(args.eta) if args.eta else spec


def _check(args) -> dict:
    spec = _load_spec(args)
    grid = ScanGrid(
        n_zeta=args.grid_zeta,
        n_nu_r=args.grid_nu[0],
        n_nu_phi=args.grid_nu[1],
        n_eta=args.grid_eta,
        theta=args.theta,
        rel_threshold=args.rel_threshold,
    )
    reports = [check_ellipticity(spec), check_LS(spec, grid), *check_ALS(spec, grid)]
    out = {"command": "check", "problem": args.example or str(args.config), "reports": [r.to_dict() for r in reports]}
    verdicts = [r.verdict for r in reports]
    if not args.no_bound:
        bound_grid = ScanGrid(
            n_zeta=BOUND_GRID.n_zeta,
            n_nu_r=BOUND_GRID.n_nu_r,
            n_nu_phi=BOUND_GRID.n_nu_phi,
            n_eta=BOUND_GRID.n_eta,
            theta=args.theta,
            rel_threshold=args.rel_threshold,
        )
        bound = multiplier_bound_scan(spec, bound_grid, refinements=args.bound_refinements)
        out["multiplier_bound"] = bound.to_dict()
        verdicts.append(bound.bounded)
    out["passed"] = all(verdicts)
    return out


def _read_field(path: Path, grid: TangentialGrid | None):
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head.startswith(b"QSFIELD"):
        return read_field_binary(path)
    if grid is None:
        raise UsageError(f"{path}: CSV input needs --K to fix the tangential grid")
    return read_field_csv(path, grid)


def _write_fields(args, u, rho) -> dict:
    args.out_dir.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, fld in (("u", u), ("rho", rho)):
        if args.format == "csv":
            path = args.out_dir / f"{name}.csv"
            write_field_csv(path, fld)
        else:
            path = args.out_dir / f"{name}.qsf"
            write_field_binary(path, fld)
        paths[name] = str(path)
    return paths


def _solve(args) -> dict:
    spec = _load_spec(args)
    if args.K < 0 or args.Nt < 1:
        raise UsageError("need K >= 0 and Nt >= 1")
    out = {"command": "solve", "problem": args.example or str(args.config), "eta": spec.eta}
    if args.manufactured:
        if args.example not in _MANUFACTURED:
            raise UsageError(f"a manufactured solution is available for examples {sorted(_MANUFACTURED)} only")
        case = laplace_dynamic_case(spec.eta, args.K, args.Nt, T=args.T, seed=args.seed, c0=_MANUFACTURED[args.example])
        solver = HalfSpaceSolver(spec, case.g[0].grid, case.u_exact.heights)
        u, rho = solver.solve(case.f, case.g, case.rho0)
        err_u = float(np.max(np.abs(u.to_physical() - case.u_exact.to_physical())))
        err_rho = float(np.max(np.abs(rho.to_physical() - case.rho_exact.to_physical())))
        out.update(
            K=args.K,
            Nt=args.Nt,
            max_error_u=err_u,
            max_error_rho=err_rho,
            tolerance=args.tolerance,
            passed=max(err_u, err_rho) <= args.tolerance,
        )
        print(f"K={args.K} Nt={args.Nt} max_error_u={err_u:.3e} max_error_rho={err_rho:.3e}", file=sys.stderr)
    else:
        if len(args.data_g) != spec.m + 1:
            raise UsageError(f"expected {spec.m + 1} --data-g files")
        grid = TangentialGrid(spec.n - 1, args.K)
        try:
            g = [_read_field(p, grid) for p in args.data_g]
            f = _read_field(args.data_f, grid) if args.data_f else None
            rho0 = _read_field(args.data_rho0, grid).values[0] if args.data_rho0 else None
        except (OSError, FieldFormatError) as exc:
            raise UsageError(str(exc)) from exc
        Y = args.Y if args.Y else 10.0 / math.sqrt(spec.eta)
        u, rho = HalfSpaceSolver(spec, g[0].grid, graded_heights(Y)).solve(f, g, rho0)
        out["passed"] = bool(np.all(np.isfinite(u.values)) and np.all(np.isfinite(rho.values)))
    out["fields"] = _write_fields(args, u, rho)
    return out


def _verify(args) -> dict:
    spec = _load_spec(args)
    ens = EnsembleSpec(size=args.ensemble_size, seed=args.seed, K=args.K, Nt=args.Nt, band=args.band, tolerance=args.tolerance)
    report = verify_max_regularity(spec, ens)
    out = {"command": "verify-estimate", "problem": args.example or str(args.config), **report.to_dict()}
    out["passed"] = report.bounded
    return out


def run(argv=None) -> tuple[int, dict]:
    """Parse ``argv``, run the command and return ``(status, document)``."""
    try:
        args = build_parser().parse_args(argv)
        if args.command == "example":
            text = builtin_text(args.example)
            if args.output:
                atomic_write(args.output, text)
            else:
                sys.stdout.write(text)
            return 0, {}
        handler = {"check": _check, "solve": _solve, "verify-estimate": _verify}[args.command]
        doc = handler(args)
    except (UsageError, ConfigError, InvariantError, PreconditionError, ValueError, OSError) as exc:
        err = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        if isinstance(exc, ConfigError):
            err["error"].update(line=exc.line, field=exc.field)
        return 2, err
    except SingularModeError as exc:
        return 1, {"error": {"type": type(exc).__name__, "message": str(exc), "mode": list(exc.mode)}}
    doc = jsonable(doc)
    if getattr(args, "report", None):
        atomic_write(args.report, json.dumps(doc, indent=2) + "\n")
    return (0 if doc["passed"] else 1), doc


def main(argv=None) -> int:
    status, doc = run(argv)
    if "error" in doc:
        print(json.dumps(doc), file=sys.stderr)
    elif doc:
        print(json.dumps(doc, indent=2))
    return status


if __name__ == "__main__":
    sys.exit(main())
