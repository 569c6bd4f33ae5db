"""W2 against the H^-1 sandwich bounds for random positive bilinear density pairs."""

import argparse

import numpy as np

from randmatch.density import SmoothSampled
from randmatch.field import GridField, sandwich_check


def random_density(rng, K):
    m = SmoothSampled(0.3 + rng.random((K + 1, K + 1)))
    return GridField(K, m.values / m.total_mass)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pairs", type=int, default=20)
    ap.add_argument("--K", type=int, default=4)
    ap.add_argument("--M", type=int, default=32)
    ap.add_argument("--seed", type=int, default=9)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'lower':>9} {'w2':>9} {'upper':>9} {'slack':>8} holds")
    for _ in range(args.pairs):
        r = sandwich_check(random_density(rng, args.K), random_density(rng, args.K), M=args.M)
        print(f"{r.lower:9.5f} {r.w2:9.5f} {r.upper:9.5f} {r.slack:8.5f} {r.holds}")


if __name__ == "__main__":
    main()
