"""Command line driver: single runs, convergence sweeps and the property suites.

    python -m subdiffusion run --example 3 --alpha 0.5 --N 81 --Ms 9
    python -m subdiffusion sweep-time --example 2 --alpha 0.5 --r optimal \\
        --N-list 64 128 256 512 --Ms 512
    python -m subdiffusion sweep-space --example 1 --alpha 0.5 --r optimal \\
        --Ms-list 16 32 64 128 --N 2048
    python -m subdiffusion verify
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .analysis import ErrorRecord, convergence_table, l2_error, max_over_time
from .l1 import optimal_grading
from .manufactured import FORCING_MODES, case, mesh_for_case, problem_from_case
from .meshes import build_time_grid
from .stepper import ProblemSpec, SolverConfig, StepFailure, solve

CSV_HEADER = ("example", "alpha", "r", "N", "Ms", "norm", "error", "order")


def fmt(x) -> str:
    return "" if x is None else "%.10g" % x


def coupled_Ms(N, alpha, factor=1):
    """Spatial resolution balanced against ``N`` time steps in 2D."""
    return factor * int(math.floor(N ** ((2.0 - alpha) / 2.0) + 1e-9))


def coupled_N(Ms, alpha):
    """Time steps balanced against ``Ms`` cells per side in 2D."""
    return int(math.floor(Ms ** (2.0 / (2.0 - alpha)) + 1e-9))


@dataclass(frozen=True)
class PointSpec:
    """One solver run of a sweep; picklable so it can go to a worker."""

    example: int
    alpha: float
    r: float
    N: int
    Ms: int
    forcing_mode: str = "pure"
    newton_tol: float = 1e-12
    max_newton: int = 25
    T: float = 1.0


@dataclass
class PointResult:
    spec: PointSpec
    errors: dict                 # norm tag -> value
    max_iterations: int
    max_gap_ratio: float         # max |l(U) - d| / (1 + |d|)
    max_unbordered: float
    formulation_ok: bool


def run_point(spec: PointSpec) -> PointResult:
    mc = case(spec.example, spec.alpha, spec.forcing_mode)
    grid = build_time_grid(spec.T, spec.N, spec.r)
    result = solve(problem_from_case(mc), mesh_for_case(mc, spec.Ms), grid,
                   SolverConfig(spec.newton_tol, spec.max_newton))
    errors = {
        "Linf_time_L2": max_over_time(result, mc, "L2"),
        "H1_semi": max_over_time(result, mc, "H1_semi"),
        "L2_final_family": l2_error(result.mesh, result.final,
                                    lambda x: mc.u(x, grid.nodes[-1])),
    }
    st = result.stats
    return PointResult(
        spec, errors, result.max_iterations,
        max((s.constraint_gap / (1.0 + abs(s.d)) for s in st), default=0.0),
        max((s.unbordered_residual for s in st), default=0.0),
        all(s.formulation_ok for s in st))


def run_points(specs, jobs=1):
    """Run sweep points, in parallel when ``jobs > 1``; results keep input order."""
    if jobs > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(run_point, specs))
    return [run_point(s) for s in specs]


def records_from(results, norms, by):
    recs = [ErrorRecord(p.spec.example, p.spec.alpha, p.spec.r, p.spec.N, p.spec.Ms,
                        norm, p.errors[norm])
            for p in results for norm in norms]
    return convergence_table(recs, by)


def table_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rec in records:
        w.writerow([rec.example, fmt(rec.alpha), fmt(rec.r), rec.N, rec.Ms, rec.norm,
                    fmt(rec.error), fmt(rec.order)])
    return buf.getvalue()


# ---------------------------------------------------------------- argument types

def _alpha(text):
    try:
        a = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0.0 < a < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {a}")
    return a


def _grading(text):
    if text == "optimal":
        return text
    try:
        r = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number >= 1 or 'optimal', got {text!r}")
    if r < 1.0:
        raise argparse.ArgumentTypeError(f"grading r must be >= 1, got {r}")
    return r


def _int_at_least(lo):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
        if v < lo:
            raise argparse.ArgumentTypeError(f"must be >= {lo}, got {v}")
        return v
    return parse


def _positive(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _resolve_r(args):
    return optimal_grading(args.alpha) if args.r == "optimal" else float(args.r)


def _common(p):
    p.add_argument("--example", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--alpha", type=_alpha, default=0.5, help="fractional order in (0, 1)")
    p.add_argument("--r", type=_grading, default=1.0,
                   help="time grading exponent (>= 1) or 'optimal' for (2-alpha)/alpha")
    p.add_argument("--T", type=_positive, default=1.0, help="final time")
    p.add_argument("--forcing-mode", choices=FORCING_MODES, default="pure",
                   help="'reactive' makes the source depend on u")
    p.add_argument("--newton-tol", type=_positive, default=1e-12)
    p.add_argument("--max-newton", type=_int_at_least(1), default=25)
    p.add_argument("--output", "-o", default=None)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="subdiffusion",
        description="L1 / P1 finite element solver for nonlocal subdiffusion problems.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single run; dumps the solution at the final time")
    _common(p)
    p.add_argument("--N", type=_int_at_least(1), default=64)
    p.add_argument("--Ms", type=_int_at_least(2), default=64)
    p.add_argument("--zero-forcing", action="store_true",
                   help="replace the manufactured source by f = 0 (exact solution 0)")
    p.set_defaults(output="solution.csv")

    p = sub.add_parser("sweep-time", help="errors and orders over a list of N")
    _common(p)
    p.add_argument("--N-list", type=_int_at_least(1), nargs="+", required=True)
    p.add_argument("--Ms", type=_int_at_least(2), default=1000)
    p.add_argument("--couple-space", action="store_true",
                   help="use Ms = factor * floor(N^((2-alpha)/2)) instead of --Ms")
    p.add_argument("--couple-factor", type=_int_at_least(1), default=1)
    p.add_argument("--final-l2", action="store_true",
                   help="also emit final-time L2 rows (norm L2_final_family)")
    p.add_argument("--jobs", type=_int_at_least(1), default=1)

    p = sub.add_parser("sweep-space", help="errors and orders over a list of Ms")
    _common(p)
    p.add_argument("--Ms-list", type=_int_at_least(2), nargs="+", required=True)
    p.add_argument("--N", type=_int_at_least(1), default=2048)
    p.add_argument("--couple-time", action="store_true",
                   help="use N = floor(Ms^(2/(2-alpha))) instead of --N")
    p.add_argument("--jobs", type=_int_at_least(1), default=1)

    p = sub.add_parser("verify", help="run the property suites")
    p.add_argument("--json", action="store_true", help="print a JSON summary")
    p.add_argument("-v", "--verbose", action="store_true")
    return ap


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _check_increasing(ap, values, name):
    if len(values) < 2:
        ap.error(f"{name} needs at least two values")
    if any(b <= a for a, b in zip(values, values[1:])):
        ap.error(f"{name} must be strictly increasing")


# ---------------------------------------------------------------- commands

def cmd_run(args):
    mc = case(args.example, args.alpha, args.forcing_mode)
    r = _resolve_r(args)
    grid = build_time_grid(args.T, args.N, r)
    mesh = mesh_for_case(mc, args.Ms)
    config = SolverConfig(args.newton_tol, args.max_newton)
    if args.zero_forcing:
        problem = ProblemSpec(args.alpha, mc.a, mc.da,
                              lambda x, t, u: np.zeros_like(u), a_bounds=(2.0, 4.0))

        def exact(x):
            return np.zeros(x.shape[:-1])
    else:
        problem = problem_from_case(mc)

        def exact(x):
            return mc.u(x, grid.nodes[-1])
    result = solve(problem, mesh, grid, config)

    numerical = mesh.to_nodal(result.final)
    rows = np.column_stack([mesh.points, numerical, exact(mesh.points)])
    head = ["x", "y"][:mesh.dim] + ["numerical", "exact"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(head)
    w.writerows([[fmt(v) for v in row] for row in rows])
    _emit(buf.getvalue(), args.output)

    err = l2_error(mesh, result.final, exact)
    print(f"example={args.example} alpha={fmt(args.alpha)} r={fmt(r)} N={args.N} "
          f"Ms={args.Ms} L2_final={err:.6e} max_newton_iterations={result.max_iterations}",
          file=sys.stderr if args.output in (None, "-") else sys.stdout)
    return 0


def cmd_sweep_time(ap, args):
    _check_increasing(ap, args.N_list, "--N-list")
    if args.couple_space and args.example != 3:
        ap.error("--couple-space applies to example 3 only")
    r = _resolve_r(args)
    specs = []
    for N in args.N_list:
        Ms = coupled_Ms(N, args.alpha, args.couple_factor) if args.couple_space else args.Ms
        specs.append(PointSpec(args.example, args.alpha, r, N, Ms, args.forcing_mode,
                               args.newton_tol, args.max_newton, args.T))
    norms = ("Linf_time_L2", "L2_final_family") if args.final_l2 else ("Linf_time_L2",)
    results = run_points(specs, args.jobs)
    _emit(table_csv(records_from(results, norms, "N")), args.output)
    return 0


def cmd_sweep_space(ap, args):
    _check_increasing(ap, args.Ms_list, "--Ms-list")
    r = _resolve_r(args)
    specs = [PointSpec(args.example, args.alpha, r,
                       coupled_N(Ms, args.alpha) if args.couple_time else args.N, Ms,
                       args.forcing_mode, args.newton_tol, args.max_newton, args.T)
             for Ms in args.Ms_list]
    results = run_points(specs, args.jobs)
    _emit(table_csv(records_from(results, ("Linf_time_L2", "H1_semi"), "Ms")),
          args.output)
    return 0


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def cmd_verify(args):
    from .verification import run_all
    results = run_all()
    ok = all(res.passed for res in results)
    if args.json:
        print(json.dumps({"passed": ok,
                          "checks": [{"name": res.name, "passed": res.passed,
                                      "detail": _jsonable(res.detail)}
                                     for res in results]}, sort_keys=True))
    else:
        for res in results:
            print(f"{'PASS' if res.passed else 'FAIL'}  {res.name}  "
                  f"{json.dumps(_jsonable(res.detail), sort_keys=True)}")
        print("all suites passed" if ok else "some suites FAILED")
    return 0 if ok else 1


def main(argv: Optional[list] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "sweep-time":
            return cmd_sweep_time(ap, args)
        if args.command == "sweep-space":
            return cmd_sweep_space(ap, args)
        return cmd_verify(args)
    except StepFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
