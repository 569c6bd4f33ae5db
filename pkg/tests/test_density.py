import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from randmatch.density import (DisconnectedSquares, PiecewiseConstant, SmoothSampled, TwoDelta, Uniform,
                               cell_masses, conditional_restriction, evaluate, from_function, grid_moments,
                               knothe_inverse, knothe_map, normalize, preset, read_density, sample_points,
                               write_density)
from randmatch.errors import DegenerateKind, EmptyCell, NotPositive, OutOfDomain, ZeroMass

POSITIVE_PRESETS = ["uniform", "linear", "pc2x2", "bump"]

positive_grid = st.integers(1, 5).flatmap(
    lambda n: arrays(np.float64, (n, n), elements=st.floats(0.1, 5.0)))


def random_model(kind, grid):
    if kind == "pc":
        return normalize(PiecewiseConstant(grid))
    padded = np.pad(grid, ((0, 1), (0, 1)), mode="edge")
    return normalize(SmoothSampled(padded))


# normalize

def test_normalize_constant_field_becomes_uniform():
    m = normalize(SmoothSampled(np.full((3, 3), 5.0)))
    assert isinstance(m, Uniform)
    assert m.corners.max() == 1.0
    m = normalize(PiecewiseConstant(np.ones((2, 2))))
    assert m(np.array([[0.3, 0.7]]))[0] == 1.0


def test_normalize_linear_samples(oracle):
    raw = SmoothSampled(np.array([[1.0, 2.0], [2.0, 3.0]]))
    assert raw.total_mass == pytest.approx(oracle("linear_total_mass_raw"), abs=1e-14)
    m = normalize(raw)
    pts = np.random.default_rng(0).random((50, 2))
    assert np.allclose(m(pts), (pts[:, 0] + pts[:, 1] + 1) / 2, atol=1e-14)


def test_normalize_errors():
    with pytest.raises(ZeroMass):
        normalize(PiecewiseConstant(np.zeros((2, 2))))
    with pytest.raises(NotPositive):
        normalize(PiecewiseConstant(np.array([[0.0, 1.0], [1.0, 1.0]])))
    with pytest.raises(NotPositive):
        normalize(PiecewiseConstant(np.array([[-1.0, 1.0], [1.0, 1.0]])))


@given(st.sampled_from(["pc", "bilinear"]), positive_grid)
@settings(max_examples=50)
def test_normalized_mass_and_ratios(kind, grid):
    m = random_model(kind, grid)
    assert abs(m.total_mass - 1.0) < 1e-10
    if not isinstance(m, Uniform):
        raw = grid if kind == "pc" else np.pad(grid, ((0, 1), (0, 1)), mode="edge")
        assert np.allclose(m.values * raw.sum(), raw * m.values.sum(), rtol=1e-12)


def test_declared_metadata_is_checked():
    v = np.array([[1.0, 2.0], [2.0, 3.0]])
    SmoothSampled(v, declared_lipschitz=math.sqrt(2) + 1e-9, declared_lower=1.0)
    with pytest.raises(ValueError):
        SmoothSampled(v, declared_lipschitz=1.0)
    with pytest.raises(ValueError):
        SmoothSampled(v, declared_lower=1.5)


def test_lipschitz_and_bounds():
    m = preset("linear")
    assert m.lipschitz == pytest.approx(math.sqrt(2) / 2)
    assert m.lower_bound == 0.5 and m.upper_bound == 1.5
    assert Uniform().lipschitz == 0.0


# cell masses and restrictions

def test_cell_masses_examples(oracle):
    assert np.allclose(cell_masses(Uniform(), 2).masses, 0.25)
    p = cell_masses(preset("linear"), 2)
    assert p.mass(0) == pytest.approx(oracle("linear_lower_left_mass"), abs=1e-15)
    ref = oracle("linear_m2_masses")
    for k in range(4):
        j, i = divmod(k, 2)
        assert p.mass(k) == pytest.approx(ref[f"{j}{i}"], abs=1e-15)
    pc = preset("pc2x2")
    assert np.allclose(cell_masses(pc, 2).masses, pc.values / 4, atol=1e-15)


def test_cell_masses_misaligned_grid():
    pc = normalize(PiecewiseConstant(np.array([[1.0, 2.0, 3.0]])))
    p = cell_masses(pc, 2).masses
    # left half covers the first cell and half of the second: (1 + 1) / 6 of the mass
    assert p[:, 0].sum() == pytest.approx(2 / 6, abs=1e-14)


@given(st.sampled_from(["pc", "bilinear"]), positive_grid, st.integers(1, 9))
@settings(max_examples=60)
def test_cell_masses_sum_to_one(kind, grid, m):
    p = cell_masses(random_model(kind, grid), m).masses
    assert np.all(p >= 0)
    assert abs(p.sum() - 1.0) < 1e-10


def test_cell_masses_degenerate_kinds():
    assert cell_masses(preset("two_delta"), 4).masses.sum() == pytest.approx(1.0)
    d = cell_masses(preset("disconnected"), 8).masses
    assert d.sum() == pytest.approx(1.0)
    assert d[:, 2:6].sum() == 0.0


def test_conditional_restriction_examples(oracle):
    u = conditional_restriction(Uniform(), cell_masses(Uniform(), 3), 4)
    assert isinstance(u, Uniform) and u.bounds == pytest.approx((1 / 3, 1 / 3, 2 / 3, 2 / 3))
    pc = preset("pc2x2")
    assert isinstance(conditional_restriction(pc, cell_masses(pc, 2), 1), Uniform)
    lin = preset("linear")
    r = conditional_restriction(lin, cell_masses(lin, 2), 0)
    assert r.bounds == (0.0, 0.0, 0.5, 0.5)
    assert r.total_mass == pytest.approx(1.0, abs=1e-14)
    pts = np.random.default_rng(1).random((20, 2)) * 0.5
    p = oracle("linear_lower_left_mass")
    assert np.allclose(r(pts), (pts[:, 0] + pts[:, 1] + 1) / 2 / p, rtol=1e-13)


def test_conditional_restriction_empty_cell():
    part = cell_masses(Uniform(), 2)
    part.masses[0, 0] = 0.0
    with pytest.raises(EmptyCell):
        conditional_restriction(Uniform(), part, 0)


def test_positive_operations_reject_degenerate_kinds():
    for name in ("two_delta", "disconnected"):
        with pytest.raises(DegenerateKind):
            knothe_map(preset(name), [[0.5, 0.5]])
        with pytest.raises(DegenerateKind):
            grid_moments(preset(name), 2)


# Knothe maps

def test_uniform_map_is_identity():
    u = np.random.default_rng(2).random((100, 2))
    assert np.array_equal(knothe_map(Uniform(), u), u)


@pytest.mark.parametrize("name", POSITIVE_PRESETS)
def test_corners_fixed(name):
    g = knothe_map(preset(name), [[0.0, 0.0], [1.0, 1.0]])
    assert np.allclose(g, [[0.0, 0.0], [1.0, 1.0]], atol=1e-13)


def test_cdf_map_against_quadrature(oracle):
    lin = preset("linear")
    marg = oracle("linear_marginal_cdf")
    pts = np.array([[0.5, float(t)] for t in marg])
    assert np.allclose(knothe_inverse(lin, pts)[:, 1], list(marg.values()), atol=1e-13)
    cond = oracle("linear_conditional_cdf_x2_0.3")
    pts = np.array([[float(t), 0.3] for t in cond])
    assert np.allclose(knothe_inverse(lin, pts)[:, 0], list(cond.values()), atol=1e-13)


@given(st.sampled_from(["pc", "bilinear"]), positive_grid,
       arrays(np.float64, (30, 2), elements=st.floats(0.0, 1.0)))
@settings(max_examples=60)
def test_map_roundtrip(kind, grid, u):
    m = random_model(kind, grid)
    assert np.allclose(knothe_inverse(m, knothe_map(m, u)), u, atol=1e-10)


@given(st.sampled_from(["pc", "bilinear"]), positive_grid, st.floats(0.0, 1.0), st.floats(0.0, 1.0),
       st.floats(0.0, 1.0), st.floats(0.0, 1.0))
@settings(max_examples=80)
def test_map_is_triangular_and_monotone(kind, grid, a, b, c, d):
    m = random_model(kind, grid)
    lo, hi = min(a, b), max(a, b)
    g = knothe_map(m, [[c, lo], [d, hi]])
    if lo < hi:
        assert g[0, 1] <= g[1, 1]
    lo, hi = min(c, d), max(c, d)
    g = knothe_map(m, [[lo, a], [hi, a]])
    assert g[0, 1] == g[1, 1]
    assert g[0, 0] <= g[1, 0]


@pytest.mark.parametrize("name", POSITIVE_PRESETS)
def test_pushforward_of_uniform_grid(name):
    m = preset(name)
    k = 1000
    g = (np.arange(k) + 0.5) / k
    u = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    x = knothe_map(m, u)
    hist, _, _ = np.histogram2d(x[:, 1], x[:, 0], bins=8, range=[[0, 1], [0, 1]])
    assert np.abs(hist / len(u) - cell_masses(m, 8).masses).max() < 1e-3


def test_out_of_domain():
    with pytest.raises(OutOfDomain):
        knothe_map(preset("linear"), [[1.1, 0.5]])
    with pytest.raises(OutOfDomain):
        evaluate(preset("linear"), [[0.5, -0.1]])


# sampling

def test_sampling_is_deterministic():
    for name in POSITIVE_PRESETS + ["two_delta", "disconnected"]:
        a = sample_points(preset(name), 500, 42)
        b = sample_points(preset(name), 500, 42)
        assert np.array_equal(a, b)


def test_uniform_chi_square():
    # a 1% test on each of 20 seeds: more than 3 rejections has probability ~1e-4
    rejected = 0
    for seed in range(20):
        X = sample_points(Uniform(), 10_000, seed)
        h, _, _ = np.histogram2d(X[:, 0], X[:, 1], bins=4, range=[[0, 1], [0, 1]])
        rejected += stats.chisquare(h.ravel()).pvalue <= 0.01
    assert rejected <= 3


def test_linear_cell_frequencies():
    N = 100_000
    m = preset("linear")
    X = sample_points(m, N, 8)
    h, _, _ = np.histogram2d(X[:, 1], X[:, 0], bins=4, range=[[0, 1], [0, 1]])
    p = cell_masses(m, 4).masses
    assert np.all(np.abs(h - N * p) <= 4 * np.sqrt(N * p * (1 - p)))


def test_two_delta_fraction():
    N = 10_000
    X = sample_points(preset("two_delta"), N, 9)
    frac = np.mean(X[:, 0] == 0.0)
    assert abs(frac - 0.5) <= 4 * 0.5 / math.sqrt(N)
    assert set(map(tuple, X)) <= {(0.0, 0.5), (1.0, 0.5)}


def test_disconnected_samples_stay_in_squares():
    X = sample_points(preset("disconnected"), 5000, 10)
    left = (X[:, 0] <= 0.25) & (X[:, 1] >= 0.375) & (X[:, 1] <= 0.625)
    right = (X[:, 0] >= 0.75) & (X[:, 1] >= 0.375) & (X[:, 1] <= 0.625)
    assert np.all(left | right)
    assert abs(left.mean() - 0.5) < 4 * 0.5 / math.sqrt(5000)


def test_from_function_and_file_roundtrip(tmp_path):
    m = from_function(lambda x, y: 1 + x * y, K=8)
    assert m.total_mass == pytest.approx(1.0, abs=1e-12)
    for model in (m, preset("pc2x2"), preset("two_delta"), preset("disconnected"), Uniform()):
        write_density(model, tmp_path / "d.ini")
        back = read_density(tmp_path / "d.ini")
        assert back.kind == model.kind
        if hasattr(model, "values") and not isinstance(model, (TwoDelta, DisconnectedSquares)):
            assert np.allclose(back.values, model.values, rtol=1e-15)


def test_density_file_schema(tmp_path):
    (tmp_path / "d.ini").write_text(
        "[density]\nkind = smooth_sampled\n# rows from the bottom\nvalues = 1 2\n  2 3\nlipschitz = 1.5\n")
    m = read_density(tmp_path / "d.ini")
    assert m(np.array([[1.0, 1.0]]))[0] == pytest.approx(1.5)
    assert m.declared_lipschitz == pytest.approx(0.75)
    (tmp_path / "e.ini").write_text("[density]\nkind = piecewise_constant\nvalues = 1 2 3\n")
    with pytest.raises(ValueError):
        read_density(tmp_path / "e.ini")
