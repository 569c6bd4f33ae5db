"""Singular coefficient of the weighted Green function against 1/(2 pi rho(z))."""

import argparse
import math

import numpy as np

from randmatch.density import preset
from randmatch.field import green_singular_coefficient

CASES = [("uniform", (0.5, 0.5)), ("linear", (0.5, 0.5)), ("linear", (0.25, 0.25)),
         ("linear", (0.75, 0.75)), ("bump", (0.5, 0.5))]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--M", type=int, nargs="+", default=[128, 256, 512])
    args = ap.parse_args()
    print(f"{'density':>8} {'z':>12} {'M':>5} {'coefficient':>12} {'target':>9} {'rel.err':>8}")
    for name, z in CASES:
        model = preset(name)
        target = 1.0 / (2 * math.pi * float(model(np.array([z]))[0]))
        for M in args.M:
            c = green_singular_coefficient(model, z, M)
            print(f"{name:>8} {str(z):>12} {M:>5} {c:12.5f} {target:9.5f} {c / target - 1:+8.3%}")


if __name__ == "__main__":
    main()
