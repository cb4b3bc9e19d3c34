"""Command line interface: ``treepoisson solve | convergence | bench``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import time
from pathlib import Path

from . import io
from .config import load_config
from .krylov import IterSettings
from .mesh import generate_structured_square, read_triangle
from .oracle import analytic_case, analytic_mesh_error, fem_cg_solve
from .pipeline import SOLVERS, discretize, solve_poisson

log = logging.getLogger("treepoisson")
_clock = time.perf_counter


def _levels(text: str):
    try:
        levels = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not levels or min(levels) < 1:
        raise argparse.ArgumentTypeError("levels must be positive integers")
    return levels


def _add_solver_args(p):
    p.add_argument("--solver", choices=sorted(SOLVERS), default="cg")
    p.add_argument("--tol", type=float, default=0.01, help="relative residual of the loop solve")
    p.add_argument("--restart", type=int, default=60, help="GMRES restart length")


def _settings(args) -> IterSettings:
    return IterSettings(tol=args.tol, restart=args.restart)


def cmd_solve(args) -> int:
    if args.mesh:
        mesh = read_triangle(args.mesh)
    else:
        mesh = generate_structured_square(args.square)
    spec = load_config(args.config)
    sol = solve_poisson(mesh, spec, _settings(args), args.solver, root=args.root)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_potential_csv(out / "potential.csv", mesh, sol.potential)
    io.write_dfield_csv(out / "dfield.csv", sol.discretization.topology, sol.edge_field())
    io.write_vtk(out / "solution.vtk", mesh, sol.potential)
    io.write_report(out / "report.json", sol.report.to_dict())
    r = sol.report
    log.info("N_p=%d N=%d N_t=%d N_l=%d, %d %s iterations, total %.4fs",
             r.n_patches, r.n_edges, r.n_tree, r.n_loops, r.projection_iterations,
             r.solver, r.time_total)
    return 0


def convergence_rows(levels, settings, solver="cg"):
    spec, exact = analytic_case()
    rows, prev = [], None
    for n in levels:
        mesh = generate_structured_square(n)
        sol = solve_poisson(mesh, spec, settings, solver)
        emax, el2 = analytic_mesh_error(sol.potential, mesh, exact)
        order = "" if prev is None else math.log(prev[1] / emax) / math.log(n / prev[0])
        rows.append({"n": n, "N_p": mesh.n_triangles, "max_error": emax, "l2_error": el2,
                     "order": order})
        prev = (n, emax)
    return rows


def bench_rows(levels, settings, solver="cg", repeat=3):
    spec, _ = analytic_case()
    rows = []
    for n in levels:
        mesh = generate_structured_square(n)
        disc = discretize(mesh)
        best = {}
        for _ in range(repeat):
            r = solve_poisson(mesh, spec, settings, solver, discretization=disc).report
            t0 = _clock()
            _, stats = fem_cg_solve(mesh, spec, settings)
            fem = _clock() - t0
            sample = {"stage1": r.time_stage1, "removal": r.time_removal, "stage2": r.time_stage2,
                      "tree_solve": r.time_tree1 + r.time_tree2, "total": r.time_total,
                      "fem_cg": fem}
            for k, v in sample.items():
                best[k] = min(best.get(k, math.inf), v)
        rows.append({"n": n, "N_p": mesh.n_triangles, **best,
                     "iterations": r.projection_iterations, "fem_iterations": stats.iterations})
    return rows


def _emit(rows, out):
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for row in rows:
            w.writerow({k: (format(v, ".6g") if isinstance(v, float) else v) for k, v in row.items()})
    finally:
        if out:
            fh.close()


def cmd_convergence(args) -> int:
    _emit(convergence_rows(args.levels, _settings(args), args.solver), args.out)
    return 0


def cmd_bench(args) -> int:
    _emit(bench_rows(args.levels, _settings(args), args.solver, args.repeat), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treepoisson", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one problem and write CSV/VTK/JSON outputs")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--mesh", metavar="PREFIX", help="Triangle .node/.ele file prefix")
    src.add_argument("--square", type=int, metavar="N", help="structured unit square, 2N^2 triangles")
    p.add_argument("--config", required=True, help="JSON problem description")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--root", type=int, default=0, help="root patch of the spanning tree")
    _add_solver_args(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("convergence", help="error table for the analytic unit-square case")
    p.add_argument("--levels", type=_levels, default=[8, 16, 32])
    p.add_argument("--out", help="CSV file (default stdout)")
    _add_solver_args(p)
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("bench", help="stage timings against a P1 FEM + CG baseline")
    p.add_argument("--levels", type=_levels, default=[32, 64, 128])
    p.add_argument("--repeat", type=int, default=3, help="best-of-k repetitions")
    p.add_argument("--out", help="CSV file (default stdout)")
    _add_solver_args(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"treepoisson: file not found: {exc.filename}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"treepoisson: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
