"""Densities on the unit square: evaluation, exact cell integrals, sampling.

Every positive density kind is stored internally as a tensor-product
piecewise-bilinear function on (possibly non-uniform) breakpoints ``xs``,
``ys``. Piecewise-constant cells are the special case of four equal corner
values. With that representation cell masses, first and second moments and
integrals of rho**2 are polynomial integrals and are computed exactly, and the
conditional CDFs used for sampling are piecewise quadratic and are inverted in
closed form.

Grid arrays are indexed ``[row, col]`` with row 0 at the bottom (smallest y).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (DegenerateKind, EmptyCell, NotNormalized, NotPositive,
                     OutOfDomain, ZeroMass)

MASS_TOL = 1e-9
DOMAIN_TOL = 1e-12

# 3-point Gauss-Legendre on [0, 1]: exact for polynomials of degree <= 5
_GL_X = 0.5 + 0.5 * np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)])
_GL_W = np.array([5.0, 8.0, 5.0]) / 18.0


class DensityModel:
    """Common base for all density kinds; concrete kinds are frozen dataclasses."""

    kind: str = ""
    positive: bool = True

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        xs, ys = self.breakpoints
        return float(xs[0]), float(ys[0]), float(xs[-1]), float(ys[-1])

    @property
    def breakpoints(self):
        raise NotImplementedError

    @property
    def corners(self) -> np.ndarray:
        """Per-cell corner values, shape (ny, nx, 2, 2) indexed [row, col, x-side, y-side]."""
        raise NotImplementedError

    @cached_property
    def total_mass(self) -> float:
        xs, ys = self.breakpoints
        hx = np.diff(xs)
        hy = np.diff(ys)
        return float(np.einsum("jiab,i,j->", self.corners, hx, hy) / 4.0)

    @cached_property
    def lower_bound(self) -> float:
        return float(self.corners.min())

    @cached_property
    def upper_bound(self) -> float:
        return float(self.corners.max())

    @cached_property
    def lipschitz(self) -> float:
        """Max of |grad rho| over the domain (inf for discontinuous fields)."""
        return _lipschitz_of(self)

    def __call__(self, pts) -> np.ndarray:
        return evaluate(self, pts)


def _as_breaks(n, given, lo=0.0, hi=1.0):
    if given is None:
        return np.linspace(lo, hi, n + 1)
    b = np.asarray(given, dtype=np.float64)
    if b.shape != (n + 1,) or np.any(np.diff(b) <= 0):
        raise ValueError(f"breakpoints must be increasing with length {n + 1}")
    return b


@dataclass(frozen=True, eq=False)
class Uniform(DensityModel):
    """Constant density on the rectangle ``[x0, x1] x [y0, y1]`` (default: Q)."""

    x0: float = 0.0
    y0: float = 0.0
    x1: float = 1.0
    y1: float = 1.0
    value: float | None = None

    kind = "uniform"

    @property
    def breakpoints(self):
        return np.array([self.x0, self.x1]), np.array([self.y0, self.y1])

    @cached_property
    def corners(self):
        area = (self.x1 - self.x0) * (self.y1 - self.y0)
        v = 1.0 / area if self.value is None else self.value
        return np.full((1, 1, 2, 2), float(v))

    @property
    def lipschitz(self):
        return 0.0


@dataclass(frozen=True, eq=False)
class PiecewiseConstant(DensityModel):
    """Constant ``values[row, col]`` on each cell of a grid (uniform m x m by default)."""

    values: np.ndarray
    xs: np.ndarray | None = None
    ys: np.ndarray | None = None

    kind = "piecewise_constant"

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("piecewise-constant values must be a 2D grid")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "xs", _as_breaks(v.shape[1], self.xs))
        object.__setattr__(self, "ys", _as_breaks(v.shape[0], self.ys))

    @property
    def breakpoints(self):
        return self.xs, self.ys

    @cached_property
    def corners(self):
        return np.broadcast_to(self.values[:, :, None, None], self.values.shape + (2, 2)).copy()


@dataclass(frozen=True, eq=False)
class SmoothSampled(DensityModel):
    """Bilinear interpolation of vertex samples ``values[row, col]``, shape (ny+1, nx+1).

    ``declared_lipschitz`` and ``declared_lower`` are optional user metadata;
    they are checked against the stored grid.
    """

    values: np.ndarray
    xs: np.ndarray | None = None
    ys: np.ndarray | None = None
    declared_lipschitz: float | None = None
    declared_lower: float | None = None

    kind = "smooth_sampled"

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or min(v.shape) < 2:
            raise ValueError("vertex grid must be 2D with at least 2 x 2 samples")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "xs", _as_breaks(v.shape[1] - 1, self.xs))
        object.__setattr__(self, "ys", _as_breaks(v.shape[0] - 1, self.ys))
        if self.declared_lipschitz is not None and self.declared_lipschitz < _lipschitz_of(self) * (1 - 1e-12):
            raise ValueError(f"declared Lipschitz constant {self.declared_lipschitz} is below the "
                             f"grid's actual slope {_lipschitz_of(self)}")
        if self.declared_lower is not None and self.declared_lower > v.min() * (1 + 1e-12):
            raise ValueError(f"declared lower bound {self.declared_lower} exceeds min value {v.min()}")

    @property
    def breakpoints(self):
        return self.xs, self.ys

    @cached_property
    def corners(self):
        v = self.values
        c = np.empty((v.shape[0] - 1, v.shape[1] - 1, 2, 2))
        c[:, :, 0, 0] = v[:-1, :-1]
        c[:, :, 1, 0] = v[:-1, 1:]
        c[:, :, 0, 1] = v[1:, :-1]
        c[:, :, 1, 1] = v[1:, 1:]
        return c


@dataclass(frozen=True, eq=False)
class TwoDelta(DensityModel):
    """Half of the mass at ``z1`` and half at ``z2``."""

    z1: tuple[float, float]
    z2: tuple[float, float]

    kind = "two_delta"
    positive = False

    @property
    def separation(self) -> float:
        return math.dist(self.z1, self.z2)

    @property
    def total_mass(self):
        return 1.0


@dataclass(frozen=True, eq=False)
class DisconnectedSquares(DensityModel):
    """Constant density on a union of axis-aligned squares ``(x0, y0, side)``."""

    squares: tuple[tuple[float, float, float], ...]
    values: tuple[float, ...] = field(default=(1.0, 1.0))

    kind = "disconnected_squares"
    positive = False

    def __post_init__(self):
        sq = tuple(tuple(float(t) for t in s) for s in self.squares)
        vals = tuple(float(v) for v in self.values)
        if len(sq) != len(vals):
            raise ValueError("one value per square is required")
        for x0, y0, side in sq:
            if side <= 0 or x0 < 0 or y0 < 0 or x0 + side > 1 + DOMAIN_TOL or y0 + side > 1 + DOMAIN_TOL:
                raise ValueError(f"square {(x0, y0, side)} must have positive side and lie in Q")
        object.__setattr__(self, "squares", sq)
        object.__setattr__(self, "values", vals)

    @property
    def square_masses(self) -> np.ndarray:
        return np.array([v * s[2] ** 2 for s, v in zip(self.squares, self.values)])

    @property
    def total_mass(self):
        return float(self.square_masses.sum())


@dataclass(frozen=True)
class CellPartition:
    """Masses ``p[row, col]`` of the m x m sub-squares of the model's domain."""

    m: int
    masses: np.ndarray
    bounds: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)

    def cell_bounds(self, k: int) -> tuple[float, float, float, float]:
        """Rectangle of cell ``k = row * m + col``."""
        if not 0 <= k < self.m * self.m:
            raise IndexError(f"cell index {k} outside 0..{self.m * self.m - 1}")
        j, i = divmod(k, self.m)
        x0, y0, x1, y1 = self.bounds
        hx = (x1 - x0) / self.m
        hy = (y1 - y0) / self.m
        return x0 + i * hx, y0 + j * hy, x0 + (i + 1) * hx, y0 + (j + 1) * hy

    def mass(self, k: int) -> float:
        return float(self.masses.flat[k])


# helpers ----------------------------------------------------------------------

def _require_positive(model):
    if not model.positive:
        raise DegenerateKind(f"operation needs a positive density, got kind {model.kind!r}")


def _require_normalized(model):
    if abs(model.total_mass - 1.0) > MASS_TOL:
        raise NotNormalized(f"density integrates to {model.total_mass!r}; call normalize() first")


def _lipschitz_of(model):
    xs, ys = model.breakpoints
    c = model.corners
    hx = np.diff(xs)[None, :]
    hy = np.diff(ys)[:, None]
    best = 0.0
    for b in (0, 1):
        gx = (c[:, :, 1, b] - c[:, :, 0, b]) / hx
        for a in (0, 1):
            gy = (c[:, :, a, 1] - c[:, :, a, 0]) / hy
            best = max(best, float(np.sqrt(gx * gx + gy * gy).max()))
    if isinstance(model, PiecewiseConstant):
        v = model.values
        jumps = (v.size > 1) and (np.ptp(v) > 0)
        return math.inf if jumps else 0.0
    return best


def _locate(breaks, t):
    idx = np.searchsorted(breaks, t, side="right") - 1
    return np.clip(idx, 0, len(breaks) - 2)


def _check_in_domain(model, pts):
    pts = np.asarray(pts, dtype=np.float64)
    x0, y0, x1, y1 = model.bounds
    if np.any(pts[..., 0] < x0 - DOMAIN_TOL) or np.any(pts[..., 0] > x1 + DOMAIN_TOL) \
            or np.any(pts[..., 1] < y0 - DOMAIN_TOL) or np.any(pts[..., 1] > y1 + DOMAIN_TOL):
        raise OutOfDomain(f"points outside the domain {model.bounds}")
    return pts


def evaluate(model: DensityModel, pts) -> np.ndarray:
    """Density values at ``pts`` (shape (..., 2)); zero outside the support."""
    pts = np.asarray(pts, dtype=np.float64)
    if isinstance(model, DisconnectedSquares):
        out = np.zeros(pts.shape[:-1])
        for (x0, y0, s), v in zip(model.squares, model.values):
            inside = (pts[..., 0] >= x0) & (pts[..., 0] <= x0 + s) & (pts[..., 1] >= y0) & (pts[..., 1] <= y0 + s)
            out = np.where(inside & (out == 0), v, out)
        return out
    _require_positive(model)
    pts = _check_in_domain(model, pts)
    xs, ys = model.breakpoints
    i = _locate(xs, pts[..., 0])
    j = _locate(ys, pts[..., 1])
    s = np.clip((pts[..., 0] - xs[i]) / (xs[i + 1] - xs[i]), 0.0, 1.0)
    t = np.clip((pts[..., 1] - ys[j]) / (ys[j + 1] - ys[j]), 0.0, 1.0)
    c = model.corners[j, i]
    return (c[..., 0, 0] * (1 - s) * (1 - t) + c[..., 1, 0] * s * (1 - t)
            + c[..., 0, 1] * (1 - s) * t + c[..., 1, 1] * s * t)


def normalize(model: DensityModel) -> DensityModel:
    """Rescale to a probability density; constant fields collapse to Uniform."""
    if isinstance(model, TwoDelta):
        return model
    if isinstance(model, DisconnectedSquares):
        if any(v < 0 for v in model.values):
            raise NotPositive("square values must be nonnegative")
        mass = model.total_mass
        if mass <= 0:
            raise ZeroMass("disconnected density has zero mass")
        return DisconnectedSquares(model.squares, tuple(v / mass for v in model.values))
    c = model.corners
    if np.any(c < 0):
        raise NotPositive(f"density has negative values (min {c.min()})")
    mass = model.total_mass
    if mass <= 0:
        raise ZeroMass("density integrates to zero")
    if c.min() <= 0:
        raise NotPositive("positive density kinds need a strictly positive minimum")
    if isinstance(model, Uniform):
        return Uniform(model.x0, model.y0, model.x1, model.y1)
    if np.ptp(model.values) == 0:
        x0, y0, x1, y1 = model.bounds
        return Uniform(x0, y0, x1, y1)
    if isinstance(model, PiecewiseConstant):
        return PiecewiseConstant(model.values / mass, model.xs, model.ys)
    lip = model.declared_lipschitz / mass if model.declared_lipschitz is not None else None
    low = model.declared_lower / mass if model.declared_lower is not None else None
    return SmoothSampled(model.values / mass, model.xs, model.ys, lip, low)


# exact cell integrals ---------------------------------------------------------

def _basis_integrals(breaks, part):
    """1D integrals over the elementary intervals of ``breaks`` merged with ``part``.

    Returns (model cell index, partition cell index, I0, I1, I2, J) where, for
    the two hat functions phi_a of the model cell, I0[e, a] = int phi_a,
    I1 = int phi_a (x - c), I2 = int phi_a (x - c)^2 with c the partition cell
    centre, and J[e, a, b] = int phi_a phi_b.
    """
    lo, hi = part[0], part[-1]
    inner = breaks[(breaks > lo) & (breaks < hi)]
    merged = np.unique(np.concatenate([part, inner]))
    a, b = merged[:-1], merged[1:]
    mid = 0.5 * (a + b)
    im = _locate(breaks, mid)
    ip = _locate(part, mid)
    X0, X1 = breaks[im], breaks[im + 1]
    c = 0.5 * (part[ip] + part[ip + 1])
    h = (b - a)[:, None]
    q = a[:, None] + h * _GL_X[None, :]          # (E, 3) nodes
    w = h * _GL_W[None, :]
    phi1 = (q - X0[:, None]) / (X1 - X0)[:, None]
    phi = np.stack([1.0 - phi1, phi1], axis=1)    # (E, 2, 3)
    d = q - c[:, None]
    I0 = np.einsum("eaq,eq->ea", phi, w)
    I1 = np.einsum("eaq,eq->ea", phi, w * d)
    I2 = np.einsum("eaq,eq->ea", phi, w * d * d)
    J = np.einsum("eaq,ebq,eq->eab", phi, phi, w)
    return im, ip, I0, I1, I2, J


def grid_moments(model: DensityModel, m: int):
    """Exact per-cell integrals over the m x m partition of the model's domain.

    Returns a dict of (m, m) arrays: ``mass``, ``mx`` and ``my`` (first moments
    about the cell centre), ``m2`` (second moment about the cell centre) and
    ``rho2`` (integral of rho squared).
    """
    _require_positive(model)
    if m < 1:
        raise ValueError("partition resolution m must be >= 1")
    xs, ys = model.breakpoints
    px = np.linspace(xs[0], xs[-1], m + 1)
    py = np.linspace(ys[0], ys[-1], m + 1)
    imx, ipx, X0, X1, X2, JX = _basis_integrals(xs, px)
    imy, ipy, Y0, Y1, Y2, JY = _basis_integrals(ys, py)
    F = model.corners[imy[:, None], imx[None, :]]   # (Ey, Ex, 2, 2)
    out = {}
    out["mass"] = np.einsum("yxab,xa,yb->yx", F, X0, Y0)
    out["mx"] = np.einsum("yxab,xa,yb->yx", F, X1, Y0)
    out["my"] = np.einsum("yxab,xa,yb->yx", F, X0, Y1)
    out["m2"] = np.einsum("yxab,xa,yb->yx", F, X2, Y0) + np.einsum("yxab,xa,yb->yx", F, X0, Y2)
    out["rho2"] = np.einsum("yxab,yxcd,xac,ybd->yx", F, F, JX, JY)
    for key, val in out.items():
        acc = np.zeros((m, m))
        np.add.at(acc, (ipy[:, None], ipx[None, :]), val)
        out[key] = acc
    return out


def cell_masses(model: DensityModel, m: int) -> CellPartition:
    """Probabilities p_k of the m x m sub-squares, exact for the stored kinds."""
    if m < 1:
        raise ValueError("partition resolution m must be >= 1")
    if isinstance(model, TwoDelta):
        p = np.zeros((m, m))
        for z in (model.z1, model.z2):
            i = min(int(z[0] * m), m - 1)
            j = min(int(z[1] * m), m - 1)
            p[j, i] += 0.5
        return CellPartition(m, p)
    if isinstance(model, DisconnectedSquares):
        p = np.zeros((m, m))
        grid = np.linspace(0.0, 1.0, m + 1)
        for (x0, y0, s), v in zip(model.squares, model.values):
            ox = np.clip(np.minimum(grid[1:], x0 + s) - np.maximum(grid[:-1], x0), 0, None)
            oy = np.clip(np.minimum(grid[1:], y0 + s) - np.maximum(grid[:-1], y0), 0, None)
            p += v * np.outer(oy, ox)
        return CellPartition(m, p)
    _require_normalized(model)
    return CellPartition(m, grid_moments(model, m)["mass"], model.bounds)


def _restrict(model, x0, y0, x1, y1, scale):
    xs, ys = model.breakpoints
    nx = np.unique(np.concatenate([[x0, x1], xs[(xs > x0) & (xs < x1)]]))
    ny = np.unique(np.concatenate([[y0, y1], ys[(ys > y0) & (ys < y1)]]))
    if isinstance(model, Uniform):
        return Uniform(x0, y0, x1, y1)
    if isinstance(model, PiecewiseConstant):
        mids = np.stack(np.meshgrid(0.5 * (nx[:-1] + nx[1:]), 0.5 * (ny[:-1] + ny[1:])), axis=-1)
        vals = evaluate(model, mids) * scale
        if np.ptp(vals) == 0:
            return Uniform(x0, y0, x1, y1)
        return PiecewiseConstant(vals, nx, ny)
    verts = np.stack(np.meshgrid(nx, ny), axis=-1)
    vals = evaluate(model, verts) * scale
    if np.ptp(vals) == 0:
        return Uniform(x0, y0, x1, y1)
    return SmoothSampled(vals, nx, ny)


def conditional_restriction(model: DensityModel, partition: CellPartition, k: int) -> DensityModel:
    """Density of a draw from ``model`` conditioned to lie in cell ``k``."""
    _require_positive(model)
    p = partition.mass(k)
    if p <= 0:
        raise EmptyCell(f"cell {k} has zero mass")
    x0, y0, x1, y1 = partition.cell_bounds(k)
    return _restrict(model, x0, y0, x1, y1, 1.0 / p)


# Knothe-Rosenblatt maps ------------------------------------------------------

def _marginal_tables(model):
    xs, ys = model.breakpoints
    c = model.corners
    hx = np.diff(xs)
    hy = np.diff(ys)
    A = np.einsum("ji,i->j", 0.5 * (c[:, :, 0, 0] + c[:, :, 1, 0]), hx)   # row marginal at band bottom
    B = np.einsum("ji,i->j", 0.5 * (c[:, :, 0, 1] + c[:, :, 1, 1]), hx)   # and at band top
    band = 0.5 * hy * (A + B)
    cum = np.concatenate([[0.0], np.cumsum(band)])
    return A, B, cum


def _solve_linear_density(lo, hi, target):
    """t in [0, 1] with int_0^t (lo (1-s) + hi s) ds = target, for lo > 0."""
    disc = np.maximum(lo * lo + 2.0 * (hi - lo) * target, 0.0)
    return np.clip(2.0 * target / (lo + np.sqrt(disc)), 0.0, 1.0)


def _row_profile(model, j, t):
    c = model.corners[j]            # (n, nx, 2, 2)
    tt = t[:, None]
    left = c[:, :, 0, 0] * (1 - tt) + c[:, :, 0, 1] * tt
    right = c[:, :, 1, 0] * (1 - tt) + c[:, :, 1, 1] * tt
    return left, right


def _unit_coords(model, pts):
    x0, y0, x1, y1 = model.bounds
    return (pts[:, 0] - x0) / (x1 - x0), (pts[:, 1] - y0) / (y1 - y0)


def knothe_map(model: DensityModel, u, chunk=1 << 16) -> np.ndarray:
    """Triangular map pushing the uniform law on the domain to ``model``.

    The y-coordinate is the inverse marginal CDF of y; the x-coordinate is the
    inverse conditional CDF of x given that y. Both inverses are closed-form
    because the CDFs are piecewise quadratic.
    """
    _require_positive(model)
    u = _check_in_domain(model, np.atleast_2d(np.asarray(u, dtype=np.float64)))
    if isinstance(model, Uniform):
        return u.copy()
    ux, uy = _unit_coords(model, u)
    ux = np.clip(ux, 0.0, 1.0)
    uy = np.clip(uy, 0.0, 1.0)
    xs, ys = model.breakpoints
    hx = np.diff(xs)
    hy = np.diff(ys)
    A, B, cum = _marginal_tables(model)
    out = np.empty_like(u)
    for start in range(0, len(u), chunk):
        sl = slice(start, start + chunk)
        w = uy[sl] * cum[-1]
        j = np.clip(np.searchsorted(cum, w, side="right") - 1, 0, len(hy) - 1)
        t = _solve_linear_density(A[j], B[j], (w - cum[j]) / hy[j])
        out[sl, 1] = ys[j] + t * hy[j]
        left, right = _row_profile(model, j, t)
        cell = 0.5 * (left + right) * hx[None, :]
        ccum = np.concatenate([np.zeros((len(j), 1)), np.cumsum(cell, axis=1)], axis=1)
        wx = ux[sl] * ccum[:, -1]
        i = (ccum[:, 1:-1] <= wx[:, None]).sum(axis=1)
        rows = np.arange(len(i))
        s = _solve_linear_density(left[rows, i], right[rows, i], (wx - ccum[rows, i]) / hx[i])
        out[sl, 0] = xs[i] + s * hx[i]
    x0, y0, x1, y1 = model.bounds
    out[:, 0] = np.clip(out[:, 0], x0, x1)
    out[:, 1] = np.clip(out[:, 1], y0, y1)
    return out


def knothe_inverse(model: DensityModel, x) -> np.ndarray:
    """Inverse of :func:`knothe_map`: (conditional CDF of x | y, marginal CDF of y), rescaled to the domain."""
    _require_positive(model)
    x = _check_in_domain(model, np.atleast_2d(np.asarray(x, dtype=np.float64)))
    xs, ys = model.breakpoints
    hx = np.diff(xs)
    hy = np.diff(ys)
    A, B, cum = _marginal_tables(model)
    j = _locate(ys, x[:, 1])
    t = np.clip((x[:, 1] - ys[j]) / hy[j], 0.0, 1.0)
    Fy = cum[j] + hy[j] * (A[j] * t + 0.5 * (B[j] - A[j]) * t * t)
    left, right = _row_profile(model, j, t)
    cell = 0.5 * (left + right) * hx[None, :]
    ccum = np.concatenate([np.zeros((len(j), 1)), np.cumsum(cell, axis=1)], axis=1)
    i = _locate(xs, x[:, 0])
    rows = np.arange(len(i))
    s = np.clip((x[:, 0] - xs[i]) / hx[i], 0.0, 1.0)
    lo, hi = left[rows, i], right[rows, i]
    Fx = ccum[rows, i] + hx[i] * (lo * s + 0.5 * (hi - lo) * s * s)
    x0, y0, x1, y1 = model.bounds
    g = np.empty_like(x)
    g[:, 0] = x0 + (x1 - x0) * Fx / ccum[:, -1]
    g[:, 1] = y0 + (y1 - y0) * Fy / cum[-1]
    return g


def sample_points(model: DensityModel, N: int, seed) -> np.ndarray:
    """N i.i.d. draws from ``model``; identical (model, N, seed) give identical clouds."""
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = np.random.default_rng(seed)
    if isinstance(model, TwoDelta):
        first = rng.random(N) < 0.5
        return np.where(first[:, None], np.asarray(model.z1, float), np.asarray(model.z2, float))
    if isinstance(model, DisconnectedSquares):
        masses = model.square_masses / model.square_masses.sum()
        which = np.searchsorted(np.cumsum(masses)[:-1], rng.random(N), side="right")
        sq = np.asarray(model.squares)[which]
        return sq[:, :2] + sq[:, 2:3] * rng.random((N, 2))
    _require_normalized(model)
    x0, y0, x1, y1 = model.bounds
    u = rng.random((N, 2))
    u[:, 0] = x0 + (x1 - x0) * u[:, 0]
    u[:, 1] = y0 + (y1 - y0) * u[:, 1]
    return knothe_map(model, u)


# presets and files ------------------------------------------------------------

def from_function(f, K: int = 64) -> SmoothSampled:
    """Sample ``f(x, y)`` on a (K+1) x (K+1) vertex grid and normalize."""
    g = np.linspace(0.0, 1.0, K + 1)
    X, Y = np.meshgrid(g, g)
    return normalize(SmoothSampled(np.asarray(f(X, Y), dtype=np.float64)))


def preset(name: str) -> DensityModel:
    """Named densities used by the experiments and the CLI."""
    if name == "uniform":
        return Uniform()
    if name == "linear":
        # rho(x) = (x1 + x2 + 1) / 2 is bilinear, so a single cell is exact
        return SmoothSampled(np.array([[1.0, 2.0], [2.0, 3.0]]) / 2.0)
    if name == "pc2x2":
        return normalize(PiecewiseConstant(np.array([[0.4, 0.8], [1.2, 1.6]])))
    if name == "bump":
        return from_function(lambda x, y: 1.0 + 0.5 * np.cos(np.pi * x) * np.cos(np.pi * y))
    if name == "two_delta":
        return TwoDelta((0.0, 0.5), (1.0, 0.5))
    if name == "disconnected":
        return normalize(DisconnectedSquares(((0.0, 0.375, 0.25), (0.75, 0.375, 0.25))))
    raise KeyError(f"unknown density preset {name!r}; known: {', '.join(PRESETS)}")


PRESETS = ("uniform", "linear", "pc2x2", "bump", "two_delta", "disconnected")


def _floats(text):
    return [float(t) for t in text.replace(";", " ").replace(",", " ").split()]


def read_density(path) -> DensityModel:
    """Parse a density specification file (see README for the schema)."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    with open(path) as fh:
        cp.read_file(fh)
    if "density" not in cp:
        raise ValueError(f"{path}: missing [density] section")
    sec = cp["density"]
    kind = sec.get("kind", "").strip()
    do_norm = sec.getboolean("normalize", fallback=True)
    if kind in PRESETS and "values" not in sec:
        return preset(kind)
    if kind == "uniform":
        model = Uniform()
    elif kind in ("piecewise_constant", "smooth_sampled"):
        vals = np.array(_floats(sec["values"]))
        n = int(round(math.sqrt(vals.size)))
        if n * n != vals.size:
            raise ValueError(f"{path}: {vals.size} values do not form a square grid")
        grid = vals.reshape(n, n)
        if kind == "piecewise_constant":
            model = PiecewiseConstant(grid)
        else:
            model = SmoothSampled(grid,
                                  declared_lipschitz=sec.getfloat("lipschitz", fallback=None),
                                  declared_lower=sec.getfloat("lower_bound", fallback=None))
    elif kind == "two_delta":
        return TwoDelta(tuple(_floats(sec["z1"])), tuple(_floats(sec["z2"])))
    elif kind == "disconnected_squares":
        flat = _floats(sec["squares"])
        squares = tuple(tuple(flat[k:k + 3]) for k in range(0, len(flat), 3))
        values = tuple(_floats(sec.get("values", " ".join(["1"] * len(squares)))))
        model = DisconnectedSquares(squares, values)
    else:
        raise ValueError(f"{path}: unknown density kind {kind!r}")
    return normalize(model) if do_norm else model


def write_density(model: DensityModel, path) -> None:
    lines = ["[density]", f"kind = {model.kind}"]
    if isinstance(model, (PiecewiseConstant, SmoothSampled)):
        lines.append("values =")
        lines += ["    " + " ".join(f"{v:.17g}" for v in row) for row in model.values]
    elif isinstance(model, TwoDelta):
        lines += [f"z1 = {model.z1[0]!r} {model.z1[1]!r}", f"z2 = {model.z2[0]!r} {model.z2[1]!r}"]
    elif isinstance(model, DisconnectedSquares):
        lines.append("squares = " + "; ".join(" ".join(repr(t) for t in s) for s in model.squares))
        lines.append("values = " + " ".join(repr(v) for v in model.values))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
