"""Recompute the frozen reference values in tests/oracles.json.

Everything here is computed without importing randmatch: exact rationals,
symbolic integration and direct enumeration.
"""

import itertools
import json
import math
from fractions import Fraction
from pathlib import Path

import sympy as sp
from scipy import integrate

x, y, t = sp.symbols("x y t", real=True)
rho_lin = (x + y + 1) / 2


def lattice_sum(N):
    K = math.isqrt(N)
    return math.fsum(1.0 / (a * a + b * b) for a in range(K + 1) for b in range(K + 1)
                     if 0 < a * a + b * b <= N)


def two_delta_exact(N):
    # enumerate the joint law of two Binomial(N, 1/2) counts with exact rationals
    pmf = [Fraction(math.comb(N, k), 2 ** N) for k in range(N + 1)]
    return sum(p * q * abs(r - s) for (r, p), (s, q) in itertools.product(enumerate(pmf), repeat=2))


def main():
    out = {}
    out["linear_total_mass_raw"] = str(sp.integrate(x + y + 1, (x, 0, 1), (y, 0, 1)))
    out["linear_lower_left_mass"] = str(sp.integrate(rho_lin, (x, 0, sp.Rational(1, 2)), (y, 0, sp.Rational(1, 2))))
    masses = {}
    for j in range(2):
        for i in range(2):
            masses[f"{j}{i}"] = str(sp.integrate(rho_lin, (x, sp.Rational(i, 2), sp.Rational(i + 1, 2)),
                                                 (y, sp.Rational(j, 2), sp.Rational(j + 1, 2))))
    out["linear_m2_masses"] = masses
    # barycenters of the m = 2 cells
    bary = {}
    for j in range(2):
        for i in range(2):
            lim = ((x, sp.Rational(i, 2), sp.Rational(i + 1, 2)), (y, sp.Rational(j, 2), sp.Rational(j + 1, 2)))
            p = sp.integrate(rho_lin, *lim)
            bary[f"{j}{i}"] = [str(sp.integrate(x * rho_lin, *lim) / p), str(sp.integrate(y * rho_lin, *lim) / p)]
    out["linear_m2_barycenters"] = bary
    # x2-marginal CDF of the linear density at 10 points, by adaptive quadrature
    pts = [0.05 + 0.1 * k for k in range(10)]
    marg = lambda s: integrate.quad(lambda u: (u + s + 1) / 2, 0, 1)[0]
    out["linear_marginal_cdf"] = {f"{p:.2f}": integrate.quad(marg, 0, p)[0] for p in pts}
    # conditional x1-CDF given x2 = 0.3 at the same points
    c = 0.3
    norm = integrate.quad(lambda u: (u + c + 1) / 2, 0, 1)[0]
    out["linear_conditional_cdf_x2_0.3"] = {
        f"{p:.2f}": integrate.quad(lambda u: (u + c + 1) / 2, 0, p)[0] / norm for p in pts}
    out["uniform_center_second_moment"] = str(sp.integrate((x - sp.Rational(1, 2)) ** 2 + (y - sp.Rational(1, 2)) ** 2,
                                                           (x, 0, 1), (y, 0, 1)))
    out["uniform_corner_second_moment"] = str(sp.integrate(x ** 2 + y ** 2, (x, 0, 1), (y, 0, 1)))
    out["uniform_quarter_cell_spread"] = str(sp.integrate((x - sp.Rational(1, 4)) ** 2 + (y - sp.Rational(1, 4)) ** 2,
                                                          (x, 0, sp.Rational(1, 2)), (y, 0, sp.Rational(1, 2))))
    out["cos_hminus1"] = float(sp.integrate(sp.diff(sp.cos(sp.pi * x) / sp.pi ** 2, x) ** 2, (x, 0, 1)))
    out["cos_hminus1_amplitude_0.2"] = float(sp.Rational(1, 25) * sp.integrate(sp.diff(sp.cos(sp.pi * x) / sp.pi ** 2, x) ** 2, (x, 0, 1)))
    out["lattice_sum_N4"] = lattice_sum(4)
    out["fourier_prediction_N4"] = 2.0 / math.pi ** 2 * lattice_sum(4)
    out["fourier_prediction_N100"] = 2.0 / math.pi ** 2 * lattice_sum(100)
    out["heat_prediction_N100"] = math.log(100) / (2 * math.pi)
    out["two_delta_N1"] = str(two_delta_exact(1))
    out["two_delta_N4"] = str(two_delta_exact(4))
    out["two_delta_N10"] = str(two_delta_exact(10))
    # one-dimensional uniform matching: E sum (x_(i) - y_(i))^2 = N / (3 (N + 1))
    out["monotone_1d_means"] = {str(N): str(Fraction(N, 3 * (N + 1))) for N in (1, 2, 5, 10, 50)}
    # two sources, two sinks on a line: the only feasible plan moves 1/4 across distance 1
    out["transport_2x2_cost"] = "1/4"
    # uniform reweighting error E||mu^m - mu||^2 = (m^2 - 1) / N
    out["uniform_reweighting"] = {str(m): str(Fraction(m * m - 1, 10 ** 5)) for m in (2, 4, 8)}
    path = Path(__file__).resolve().parent.parent / "tests" / "oracles.json"
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
