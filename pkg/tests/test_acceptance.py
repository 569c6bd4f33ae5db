"""Acceptance protocols.

Each ``criterion_*`` function runs one protocol at its stated size and
tolerance and returns ``(passed, detail)``. Under pytest every criterion prints
one PASS/FAIL line; run this file directly to get the twelve lines alone:

    python tests/test_acceptance.py
"""

import math
import sys
import time
from functools import lru_cache

import numpy as np
import pytest

from randmatch.density import SmoothSampled, preset
from randmatch.experiments import (BIPARTITE_TARGET, SEMIDISCRETE_TARGET, ExperimentConfig, ast_check,
                                   concentration_check, records_to_csv, run_bipartite, run_disconnected,
                                   run_semidiscrete, two_delta_expected_cost)
from randmatch.field import GridField, green_singular_coefficient, hminus1_norm, sandwich_check
from randmatch.transport import brute_force_assignment, monotone_1d, solve_assignment

BIPARTITE_NS = (128, 256, 512, 1024, 2048)
BIPARTITE_TRIALS = (400, 300, 200, 100, 50)
SEMIDISCRETE_NS = (64, 128, 256, 512)
SEMIDISCRETE_TRIALS = (1000, 800, 600, 400)


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def criterion_1():
    def run():
        worst = 0.0
        for s in range(200):
            rng = np.random.default_rng([1, s])
            n = int(rng.integers(2, 9))
            X, Y = rng.random((n, 2)), rng.random((n, 2))
            worst = max(worst, abs(solve_assignment(X, Y).cost - brute_force_assignment(X, Y).cost))
        return worst
    worst, dt = _timed(run)
    return worst <= 1e-9 and dt < 10, f"max |solver - brute force| = {worst:.2e} over 200 instances, {dt:.1f}s"


def criterion_2():
    def run():
        rows = []
        for N in (1, 2, 5, 10, 50):
            rng = np.random.default_rng([2, N])
            c = np.array([monotone_1d(rng.random(N), rng.random(N)).cost for _ in range(20000)])
            exact = N / (3 * (N + 1))
            rows.append((N, (c.mean() - exact) / (c.std(ddof=1) / math.sqrt(c.size))))
        return rows
    rows, dt = _timed(run)
    ok = all(abs(z) <= 3 for _, z in rows) and dt < 60
    return ok, "z-scores " + ", ".join(f"N={N}: {z:+.2f}" for N, z in rows) + f"; {dt:.1f}s"


@lru_cache(maxsize=None)
def bipartite_fit(density):
    cfg = ExperimentConfig("bipartite", BIPARTITE_NS, BIPARTITE_TRIALS, density=density)
    res, dt = _timed(lambda: run_bipartite(cfg))
    return res.fit, dt


def _in_band(ratio, lo, hi):
    return lo <= ratio <= hi


def criterion_3():
    fit, dt = bipartite_fit("uniform")
    ok = _in_band(fit.ratio, 0.85, 1.15) and dt < 1800
    return ok, f"slope {fit.slope:.4f} +- {fit.slope_stderr:.4f}, ratio to 1/(2 pi) {fit.ratio:.3f}; {dt:.0f}s"


def criterion_4():
    uni, _ = bipartite_fit("uniform")
    parts, ok, total = [], True, 0.0
    for name in ("linear", "pc2x2"):
        fit, dt = bipartite_fit(name)
        total += dt
        rel = abs(fit.slope / uni.slope - 1)
        ok &= _in_band(fit.ratio, 0.85, 1.15) and rel < 0.10
        parts.append(f"{name}: ratio {fit.ratio:.3f}, vs uniform {100 * rel:.1f}%")
    ok &= total < 3600
    return ok, "; ".join(parts) + f"; {total:.0f}s"


def criterion_5():
    cfg = ExperimentConfig("semidiscrete", SEMIDISCRETE_NS, SEMIDISCRETE_TRIALS)
    res, dt = _timed(lambda: run_semidiscrete(cfg))
    fit = res.fit
    raw = res.report["raw_fit"]
    ok = _in_band(fit.ratio, 0.8, 1.2) and dt < 2700
    return ok, (f"corrected slope {fit.slope:.4f} +- {fit.slope_stderr:.4f} (ratio {fit.ratio:.3f}), "
                f"raw ratio {raw['ratio']:.3f}, target 1/(4 pi) = {SEMIDISCRETE_TARGET:.4f}; {dt:.0f}s")


def criterion_6():
    t0 = time.perf_counter()
    r = two_delta_expected_cost(10**4) / math.sqrt(10**4 / math.pi)
    res = run_disconnected(ExperimentConfig("two_delta", (1000,), (1000,), density="two_delta"))
    row = res.table[0]
    dt = time.perf_counter() - t0
    ok = 0.99 <= r <= 1.01 and abs(row["mean"] - row["exact"]) <= 3 * row["stderr"] and dt < 60
    return ok, (f"exact/sqrt(N/pi) at 1e4 = {r:.5f}; Monte Carlo {row['mean']:.3f} +- {row['stderr']:.3f} "
                f"vs exact {row['exact']:.3f}; {dt:.0f}s")


def criterion_7():
    cfg = ExperimentConfig("disconnected", (512, 1024, 2048), (300, 200, 150), density="disconnected")
    res, dt = _timed(lambda: run_disconnected(cfg))
    s = [row["mean_over_sqrtN"] for row in res.table]
    lg = [row["mean_over_logN"] for row in res.table]
    ok = res.report["sqrt_ratio_stable"] and res.report["log_ratio_increasing"] and dt < 1200
    return ok, ("C/sqrt(N) " + ", ".join(f"{v:.4f}" for v in s) + "; C/log(N) " + ", ".join(f"{v:.3f}" for v in lg)
                + f"; {dt:.0f}s")


def criterion_8():
    t0 = time.perf_counter()
    cu = green_singular_coefficient(preset("uniform"), (0.5, 0.5), 512)
    cl = green_singular_coefficient(preset("linear"), (0.25, 0.25), 512)
    dt = time.perf_counter() - t0
    eu = abs(cu * 2 * math.pi - 1)
    el = abs(cl * 1.5 * math.pi - 1)
    return eu < 0.05 and el < 0.07 and dt < 300, (f"uniform {cu:.5f} ({100 * eu:.2f}% off), "
                                                   f"linear at (1/4,1/4) {cl:.5f} ({100 * el:.2f}% off); {dt:.1f}s")


def criterion_9():
    t0 = time.perf_counter()
    h = hminus1_norm(GridField.from_function(lambda x, y: np.cos(np.pi * x), 256))
    err = abs(h * 2 * math.pi ** 2 - 1)
    rng = np.random.default_rng(9)
    held = 0
    for _ in range(20):
        fields = []
        for _ in range(2):
            model = SmoothSampled(0.3 + rng.random((5, 5)))
            model = SmoothSampled(model.values / model.total_mass)
            fields.append(GridField(4, model.values))
        held += sandwich_check(*fields, M=32).holds
    dt = time.perf_counter() - t0
    return err < 1e-3 and held == 20 and dt < 300, f"H^-1 relative error {err:.1e}; sandwich held {held}/20; {dt:.0f}s"


def criterion_10():
    t0 = time.perf_counter()
    parts, ok = [], True
    for name in ("uniform", "linear", "pc2x2"):
        res = ast_check(ExperimentConfig("ast", (256,), (100,), density=name))
        row = res.table[0]
        ok &= row["holds"]
        parts.append(f"{name}: {row['mean']:.5f} <= {row['bound']:.5f}")
    dt = time.perf_counter() - t0
    return ok and dt < 600, "; ".join(parts) + f"; {dt:.0f}s"


def criterion_11():
    t0 = time.perf_counter()
    parts, ok = [], True
    for name in ("uniform", "linear", "bump"):
        rep = concentration_check(preset(name), (2, 4, 8), 10**5, trials=400)
        ok &= abs(rep["slope"] - 2) <= 0.4
        parts.append(f"{name} slope {rep['slope']:.3f} (exact {rep['exact_slope']:.3f})")
    dt = time.perf_counter() - t0
    return ok and dt < 120, "; ".join(parts) + f"; {dt:.1f}s"


def criterion_12():
    configs = [
        ExperimentConfig("bipartite", (16, 32, 64), (3,), density="linear", seed=12),
        ExperimentConfig("semidiscrete", (16, 32, 64), (2,), density="pc2x2", seed=12),
        ExperimentConfig("two_delta", (16, 32), (3,), density="two_delta", seed=12),
        ExperimentConfig("disconnected", (16, 32), (3,), density="disconnected", seed=12),
        ExperimentConfig("grid_ansatz", (16, 32), (3,), density="pc2x2", seed=12),
        ExperimentConfig("ast", (16, 32), (2,), density="bump", seed=12),
    ]
    from randmatch.experiments import RUNNERS
    same = 0
    for cfg in configs:
        a = records_to_csv(RUNNERS[cfg.mode](cfg).records)
        b = records_to_csv(RUNNERS[cfg.mode](cfg).records)
        c = records_to_csv(RUNNERS[cfg.mode](cfg, jobs=2).records)
        same += (a == b == c)
    return same == len(configs), f"{same}/{len(configs)} modes byte-identical across reruns and worker counts"


CRITERIA = [
    (1, "assignment equals brute force", criterion_1),
    (2, "one-dimensional closed form", criterion_2),
    (3, "uniform bipartite slope", criterion_3),
    (4, "density independence of the slope", criterion_4),
    (5, "semidiscrete slope", criterion_5),
    (6, "two-point exact law", criterion_6),
    (7, "disconnected support scaling", criterion_7),
    (8, "Green singular coefficient", criterion_8),
    (9, "H^-1 norm and W2 sandwich", criterion_9),
    (10, "bipartite vs semidiscrete comparison", criterion_10),
    (11, "reweighting concentration scaling", criterion_11),
    (12, "byte-identical reruns", criterion_12),
]


def _line(k, name, ok, detail):
    return f"{'PASS' if ok else 'FAIL'} [{k:2d}] {name}: {detail}"


@pytest.mark.slow
@pytest.mark.parametrize("k,name,fn", CRITERIA, ids=[f"criterion_{k}" for k, _, _ in CRITERIA])
def test_criterion(k, name, fn, capsys):
    ok, detail = fn()
    with capsys.disabled():
        print("\n" + _line(k, name, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    wanted = {int(a) for a in sys.argv[1:]}
    failures = 0
    for k, name, fn in CRITERIA:
        if wanted and k not in wanted:
            continue
        ok, detail = fn()
        failures += not ok
        print(_line(k, name, ok, detail), flush=True)
    sys.exit(1 if failures else 0)
