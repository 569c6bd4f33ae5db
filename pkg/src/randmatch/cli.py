"""Command-line entry point: ``randmatch <subcommand> [options]``."""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import time
from importlib import metadata

import numpy as np

from . import experiments as ex
from .errors import ConfigInvalid, RandMatchError
from .field import (GridField, fourier_cutoff_prediction, green_function, green_singular_coefficient,
                    heat_cutoff_prediction, write_field)
from .semidiscrete import default_resolution, w2_to_density
from .density import sample_points
from .transport import read_cloud, solve_assignment, write_assignment, write_cloud

DEFAULT_SEED = ex.DEFAULT_SEED


def _versions():
    out = {"python": platform.python_version()}
    for dist in ("numpy", "scipy", "numba", "pot", "artifact"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = None
    return out


def write_manifest(out_dir, args, config=None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    echo = {k: v for k, v in vars(args).items() if k != "func"}
    doc = {"command": args.command, "arguments": echo, "seed": getattr(args, "seed", None),
           "config": None if config is None else ex.asdict(config), "versions": _versions()}
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=ex._json_default)
        fh.write("\n")
    with open(os.path.join(out_dir, "run.log"), "a") as fh:
        fh.write(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} {args.command} {json.dumps(echo, default=str)}\n")


# subcommands ----------------------------------------------------------------------

def cmd_sample(args):
    model = ex.resolve_density(args.density)
    pts = sample_points(model, args.n, args.seed)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_cloud(os.path.join(args.out, "sample.txt"), pts)
        write_manifest(args.out, args)
    else:
        write_cloud(sys.stdout, pts)


def cmd_match(args):
    X, Y = read_cloud(args.x), read_cloud(args.y)
    a = solve_assignment(X, Y)
    print(f"cost {a.cost!r}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_assignment(os.path.join(args.out, "assignment.txt"), a)
        write_manifest(args.out, args)


def cmd_w2(args):
    X = read_cloud(args.points)
    model = ex.resolve_density(args.density)
    M = args.resolution or default_resolution(len(X))
    raw, corrected = w2_to_density(X, model, M=M)
    print(f"M {M}")
    print(f"raw {raw!r}")
    print(f"corrected {corrected!r}")
    if args.out:
        write_manifest(args.out, args)


def cmd_predict(args):
    print(f"heat {heat_cutoff_prediction(args.n)!r}")
    print(f"fourier {fourier_cutoff_prediction(args.n)!r}")


def cmd_green(args):
    model = ex.resolve_density(args.density)
    coef = green_singular_coefficient(model, args.z, args.M)
    rho_z = float(model(np.asarray([args.z]))[0])
    print(f"coefficient {coef!r}")
    print(f"target {1.0 / (2.0 * math.pi * rho_z)!r}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_field(os.path.join(args.out, "green.txt"), green_function(model, args.z, args.M))
        write_manifest(args.out, args)


def cmd_experiment(args):
    config = ex.load_config(args.config, seed=args.seed, out=args.out)
    result = ex.run_experiment(config, jobs=args.jobs)
    out = config.out or "results"
    if not config.out:
        result.write(out)
    write_manifest(out, args, config)
    for row in result.table:
        print("  ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
    if result.fit is not None:
        f = result.fit
        print(f"slope {f.slope:.6g} +- {f.slope_stderr:.2g}  target {f.target:.6g}  ratio {f.ratio:.4f}")
    for k, v in result.report.items():
        if not isinstance(v, dict):
            print(f"{k} {v}")


def cmd_report(args):
    out = args.out or "report"
    os.makedirs(out, exist_ok=True)
    for path in args.csv:
        records = ex.read_csv(path)
        if not records:
            continue
        stem = os.path.splitext(os.path.basename(path))[0]
        cols = [("cost", lambda r: r.cost)]
        if any(r.corrected is not None for r in records):
            cols.append(("corrected", lambda r: r.corrected))
        if any(r.raw is not None for r in records):
            cols.append(("raw", lambda r: r.raw))
        tables = {name: ex.per_n_table(records, fn) for name, fn in cols}
        dat = os.path.join(out, f"{stem}.dat")
        with open(dat, "w") as fh:
            fh.write("# N logN trials " + " ".join(f"{n}_mean {n}_stderr" for n, _ in cols) + "\n")
            for i, row in enumerate(tables["cost"]):
                vals = " ".join(f"{tables[n][i]['mean']!r} {tables[n][i]['stderr']!r}" for n, _ in cols)
                fh.write(f"{row['N']} {math.log(row['N'])!r} {row['trials']} {vals}\n")
        print(f"{stem} ({records[0].mode}) -> {dat}")
        print(f"  {'N':>8} {'trials':>7} " + " ".join(f"{n + ' mean':>16} {'stderr':>10}" for n, _ in cols))
        for i, row in enumerate(tables["cost"]):
            print(f"  {row['N']:>8} {row['trials']:>7} "
                  + " ".join(f"{tables[n][i]['mean']:>16.6g} {tables[n][i]['stderr']:>10.3g}" for n, _ in cols))
        if len(tables["cost"]) >= 3:
            mode = records[0].mode
            key = "corrected" if mode == "semidiscrete" else "cost"
            scale = float if mode == "semidiscrete" else (lambda N: 1.0)
            target = ex.SEMIDISCRETE_TARGET if mode == "semidiscrete" else ex.BIPARTITE_TARGET
            fit = ex._fit_table(tables[key], scale, target)
            print(f"  slope vs log N {fit.slope:.6g} +- {fit.slope_stderr:.2g} (ratio to target {fit.ratio:.4f})")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="randmatch", description="Random Euclidean matching experiments on the unit square.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        if seed:
            sp.add_argument("--seed", type=int, default=None if sp.prog.endswith("experiment") else DEFAULT_SEED,
                            help=f"master seed (default {DEFAULT_SEED})")
        sp.add_argument("--out", default=None, help="output directory")

    sp = sub.add_parser("sample", help="draw i.i.d. points from a density")
    sp.add_argument("--density", default="uniform", help="preset name or density file")
    sp.add_argument("--n", type=int, required=True)
    common(sp)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("match", help="optimal matching cost between two point files")
    sp.add_argument("x")
    sp.add_argument("y")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_match)

    sp = sub.add_parser("w2", help="W2^2 between a point file and a density")
    sp.add_argument("points")
    sp.add_argument("--density", default="uniform")
    sp.add_argument("--resolution", type=int, default=None, help="cells per side (default ceil(4 sqrt N))")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_w2)

    sp = sub.add_parser("predict", help="cutoff predictions for the bipartite cost")
    sp.add_argument("--n", type=float, required=True)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("green", help="singular coefficient of the weighted Green function")
    sp.add_argument("--density", default="uniform")
    sp.add_argument("--z", type=float, nargs=2, default=(0.5, 0.5))
    sp.add_argument("--M", type=int, default=512)
    common(sp, seed=False)
    sp.set_defaults(func=cmd_green)

    sp = sub.add_parser("experiment", help="run a Monte Carlo experiment from a config file")
    sp.add_argument("--config", required=True)
    sp.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    common(sp)
    sp.set_defaults(func=cmd_experiment)

    sp = sub.add_parser("report", help="summary tables and gnuplot data from experiment CSVs")
    sp.add_argument("csv", nargs="+")
    common(sp, seed=False)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigInvalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RandMatchError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
