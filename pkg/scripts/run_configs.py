"""Run every experiment config in configs/ (or the ones given) and print the summaries."""

import argparse
import glob
import os

from randmatch.experiments import load_config, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("configs", nargs="*")
    ap.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()
    paths = args.configs or sorted(p for p in glob.glob("configs/*.ini") if "density" not in p)
    for path in paths:
        cfg = load_config(path)
        res = run_experiment(cfg, jobs=args.jobs)
        print(f"== {path}: {cfg.mode} on {cfg.density}")
        for row in res.table:
            print("   " + "  ".join(f"{k}={v:.5g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
        if res.fit is not None:
            print(f"   slope {res.fit.slope:.5f} +- {res.fit.slope_stderr:.5f}, ratio to target {res.fit.ratio:.3f}")
        for k, v in res.report.items():
            if not isinstance(v, dict):
                print(f"   {k}: {v}")


if __name__ == "__main__":
    main()
