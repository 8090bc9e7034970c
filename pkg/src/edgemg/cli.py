"""Command-line front end.

::

    edgemg generate --kind blur --size 64 --noise 0.01 --seed 0 --out prob/
    edgemg solve prob/ --out run/ [--nu1 2 --nu2 1 --trim-mode after_first ...]
    edgemg sweep prob/ --cycles 0,1 1,1 2,1 --out cycles.csv

``solve`` exits 0 when the run stopped because the chosen lambda index
repeated three times, 2 when it hit ``--max-outer``, and 1 on bad input.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, driver, export, problems, sparse
from .lcurve import write_lcurve_csv

log = logging.getLogger("edgemg")

EXIT_OK = 0
EXIT_BAD_INPUT = 1
EXIT_MAX_ITERATIONS = 2

_PROBLEM_FILES = ("A.mtx", "b.raw", "b_true.raw", "x_true.raw", "problem.json")


class InputError(Exception):
    """Problem directory or arguments are unusable."""


# -- argument parsing ---------------------------------------------------------


def _lambda_grid(text):
    try:
        hi, lo, count = text.split(":")
        return float(hi), float(lo), int(count)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected hi:lo:count, got {text!r}") from None


def _cycle(text):
    try:
        nu1, nu2 = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected nu1,nu2, got {text!r}") from None
    if nu1 < 0 or nu2 < 0:
        raise argparse.ArgumentTypeError("sweep counts must be nonnegative")
    return nu1, nu2


def _add_run_options(p):
    g = p.add_argument_group("run configuration (defaults follow RunConfig)")
    g.add_argument("--q", type=float, help="weight exponent")
    g.add_argument("--theta", type=float, help="AMG strength threshold")
    g.add_argument("--nu1", type=int, help="pre-relaxation sweeps")
    g.add_argument("--nu2", type=int, help="post-relaxation sweeps")
    g.add_argument("--tol", type=float, help="absolute normal-equations residual tolerance")
    g.add_argument("--max-outer", type=int, help="maximum outer iterations")
    g.add_argument("--max-inner", type=int, help="maximum FGMRES iterations per solve")
    g.add_argument("--trim-mode", choices=driver.TRIM_MODES)
    g.add_argument("--lambda-grid", type=_lambda_grid, metavar="HI:LO:COUNT", help="exponents and size")
    g.add_argument("--no-warm-start", action="store_true", help="zero initial guess for every solve")


def build_parser():
    parser = argparse.ArgumentParser(prog="edgemg", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a test problem to a directory")
    gen.add_argument("--kind", choices=problems.PROBLEM_KINDS, required=True)
    gen.add_argument("--size", type=int, default=64, help="image side length n")
    gen.add_argument("--noise", type=float, default=0.01, help="relative noise level")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", type=Path, required=True, help="output directory")

    sol = sub.add_parser("solve", help="run the reconstruction on a generated problem")
    sol.add_argument("problem_dir", type=Path)
    sol.add_argument("--out", type=Path, help="output directory (default: <problem_dir>/solve)")
    _add_run_options(sol)

    sw = sub.add_parser("sweep", help="compare V-cycle variants on one problem")
    sw.add_argument("problem_dir", type=Path)
    sw.add_argument("--cycles", type=_cycle, nargs="+", default=[(0, 1), (1, 1), (1, 2), (2, 1), (2, 2)])
    sw.add_argument("--out", type=Path, help="CSV path (default: <problem_dir>/sweep.csv)")
    _add_run_options(sw)
    return parser


def config_from_args(args) -> driver.RunConfig:
    kw = dict(
        q=args.q,
        theta=args.theta,
        nu1=args.nu1,
        nu2=args.nu2,
        abs_tol=args.tol,
        max_outer=args.max_outer,
        max_inner=args.max_inner,
        trim_mode=args.trim_mode,
    )
    if args.lambda_grid is not None:
        kw["hi_exp"], kw["lo_exp"], kw["n_lambdas"] = args.lambda_grid
    if args.no_warm_start:
        kw["warm_start"] = False
    return driver.with_overrides(driver.RunConfig(), **kw)


# -- problem files ------------------------------------------------------------


def save_problem(p: problems.Problem, out_dir: Path) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    sparse.write_matrix_market(out_dir / "A.mtx", p.A)
    export.write_raw(out_dir / "b.raw", p.b)
    export.write_raw(out_dir / "b_true.raw", p.b_true)
    img = problems.to_image(p.x_true, p.n_v, p.n_h)
    export.write_raw(out_dir / "x_true.raw", img, image=True)
    export.write_pgm(out_dir / "x_true.pgm", img)
    if p.kind.startswith("tomo"):
        nd = p.extra["detectors"]
        sino = p.b.reshape(-1, nd)
        export.write_raw(out_dir / "sinogram.raw", sino)
        export.write_pgm(out_dir / "sinogram.pgm", sino)
    desc = p.descriptor()
    export.write_json(out_dir / "problem.json", desc)
    return desc


def load_problem(problem_dir: Path) -> problems.Problem:
    if not problem_dir.is_dir():
        raise InputError(f"{problem_dir} is not a directory")
    missing = [f for f in _PROBLEM_FILES if not (problem_dir / f).exists()]
    if missing:
        raise InputError(f"{problem_dir} lacks {', '.join(missing)}; run 'edgemg generate' first")
    try:
        desc = json.loads((problem_dir / "problem.json").read_text())
        n_v, n_h = int(desc["n_v"]), int(desc["n_h"])
        A = sparse.read_matrix_market(problem_dir / "A.mtx")
        b = export.read_raw(problem_dir / "b.raw")
        b_true = export.read_raw(problem_dir / "b_true.raw")
        img = export.read_raw(problem_dir / "x_true.raw")
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot read problem in {problem_dir}: {exc}") from exc
    if A.shape != (b.size, n_v * n_h):
        raise InputError(f"A has shape {A.shape}, expected ({b.size}, {n_v * n_h})")
    if img.shape != (n_v, n_h) or b_true.shape != b.shape:
        raise InputError("x_true or b_true does not match the problem dimensions")
    return problems.Problem(
        A, b, b_true, problems.from_image(img), n_v, n_h,
        desc.get("kind", "custom"), desc.get("noise", 0.0), desc.get("seed", 0),
    )


# -- commands -----------------------------------------------------------------


def cmd_generate(args) -> int:
    p = problems.make_problem(args.kind, args.size, args.noise, args.seed)
    save_problem(p, args.out)
    print(f"wrote {args.kind} problem (A {p.A.n_rows}x{p.A.n_cols}, nnz {p.A.nnz}) to {args.out}")
    return EXIT_OK


def _outer_rows(res):
    return [
        {
            "ell": o.ell,
            "chosen_index": o.chosen_index,
            "chosen_lambda": o.chosen_lambda,
            "rel_error": o.rel_error,
            "inner_min": int(min(o.iterations)),
            "inner_avg": o.avg_iterations,
            "inner_max": int(max(o.iterations)),
            "nonconverged": o.nonconverged,
            "wall_time": o.wall_time,
        }
        for o in res.outer
    ]


def cmd_solve(args) -> int:
    p = load_problem(args.problem_dir)
    cfg = config_from_args(args)
    out = args.out or args.problem_dir / "solve"
    out.mkdir(parents=True, exist_ok=True)
    res = driver.run(p.A, p.b, p.n_v, p.n_h, cfg, x_true=p.x_true)

    artifacts = {}
    img = problems.to_image(res.final_image, p.n_v, p.n_h)
    export.write_pgm(out / "final.pgm", img)
    export.write_raw(out / "final.raw", img, image=True)
    artifacts["final_pgm"] = "final.pgm"
    artifacts["final_raw"] = "final.raw"
    artifacts["final_raw_sidecar"] = "final.raw.json"
    res.write_history_csv(out / "history.csv")
    artifacts["history"] = "history.csv"
    lc = []
    for o in res.outer:
        name = f"lcurve_{o.ell:02d}.csv"
        write_lcurve_csv(out / name, o.lcurve)
        lc.append(name)
    artifacts["lcurves"] = lc
    with open(out / "solves.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["outer_iter", "lambda_index", "lambda", "iterations", "final_residual", "converged", "start"])
        for r in res.records:
            w.writerow([r.ell, r.index, repr(r.lam), r.iterations, repr(float(r.report.final_residual_norm)),
                        int(r.converged), r.start])
    artifacts["solves"] = "solves.csv"

    manifest = {
        "config": cfg.as_dict(),
        "problem": p.descriptor(),
        "outer": _outer_rows(res),
        "stop_reason": res.stop_reason,
        "chosen_indices": res.state.chosen_indices,
        "total_inner_iterations": res.total_iterations(),
        "artifacts": artifacts,
    }
    export.write_json(out / "manifest.json", manifest)
    last = res.outer[-1]
    err = "" if last.rel_error is None else f", relative error {last.rel_error:.4f}"
    print(f"{res.stop_reason} after {res.state.ell} outer iterations: lambda={last.chosen_lambda:.4g}{err}")
    return EXIT_OK if res.stop_reason == driver.STOP_THREE_EQUAL else EXIT_MAX_ITERATIONS


def cmd_sweep(args) -> int:
    p = load_problem(args.problem_dir)
    base = config_from_args(args)
    path = args.out or args.problem_dir / "sweep.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cycle", "ell", "chosen_index", "avg_iters", "min_iters", "max_iters", "stop_reason"])
        for nu1, nu2 in args.cycles:
            res = driver.run(p.A, p.b, p.n_v, p.n_h, driver.with_overrides(base, nu1=nu1, nu2=nu2))
            for o in res.outer:
                w.writerow([f"V({nu1},{nu2})", o.ell, o.chosen_index, f"{o.avg_iterations:.2f}",
                            min(o.iterations), max(o.iterations), res.stop_reason])
            fh.flush()
            avgs = " ".join(f"{o.avg_iterations:.2f}" for o in res.outer)
            print(f"V({nu1},{nu2}): {avgs}")
    return EXIT_OK


_COMMANDS = {"generate": cmd_generate, "solve": cmd_solve, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except InputError as exc:
        print(f"edgemg: error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (OSError, ValueError) as exc:
        print(f"edgemg: error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
