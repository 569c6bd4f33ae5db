"""Neumann-square field machinery: cosine spectra, weighted Poisson solves,
Green-function singular coefficients, H^-1 norms and the W2 sandwich.

Fields live on the (M+1) x (M+1) vertices of the uniform grid on Q. The finite
volume scheme is vertex centred: each vertex owns the part of the square
``[x - h/2, x + h/2]^2`` inside Q, so boundary control volumes are halves and
corners quarters. With unit conductivity this operator is diagonalised exactly
by the type-I discrete cosine transform, which serves as the CG preconditioner.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import fft

from .density import DensityModel, SmoothSampled, _require_positive
from .errors import NotNormalized, NotPositiveWeight, RegressionIllConditioned, SolverDiverged
from .semidiscrete import discretize_measure
from .transport import solve_transportation

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GridField:
    M: int
    values: np.ndarray   # (M+1, M+1), [row = y index, col = x index]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.M + 1, self.M + 1):
            raise ValueError(f"expected {(self.M + 1, self.M + 1)} vertex values, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("grid field has non-finite values")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, f, M: int) -> "GridField":
        g = np.linspace(0.0, 1.0, M + 1)
        X, Y = np.meshgrid(g, g)
        return cls(M, np.broadcast_to(np.asarray(f(X, Y), dtype=np.float64), X.shape).copy())

    @classmethod
    def from_model(cls, model: DensityModel, M: int) -> "GridField":
        g = np.linspace(0.0, 1.0, M + 1)
        return cls(M, model(np.stack(np.meshgrid(g, g), axis=-1)))

    @property
    def h(self) -> float:
        return 1.0 / self.M

    @property
    def areas(self) -> np.ndarray:
        w = trapezoid_weights(self.M)
        return np.outer(w, w)

    @property
    def mean(self) -> float:
        return float((self.areas * self.values).sum())

    def l2_norm_sq(self) -> float:
        return float((self.areas * self.values ** 2).sum())

    def __add__(self, other):
        return GridField(self.M, self.values + other.values)

    def __sub__(self, other):
        return GridField(self.M, self.values - other.values)

    def __mul__(self, alpha):
        return GridField(self.M, alpha * self.values)

    __rmul__ = __mul__


def trapezoid_weights(M: int) -> np.ndarray:
    w = np.full(M + 1, 1.0 / M)
    w[0] = w[-1] = 0.5 / M
    return w


def project_zero_mean(charge: GridField) -> tuple[GridField, float]:
    mu = charge.mean
    return GridField(charge.M, charge.values - mu), mu


def write_field(path, f: GridField) -> None:
    with open(path, "w") as fh:
        fh.write(f"{f.M}\n")
        for row in f.values:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_field(path) -> GridField:
    with open(path) as fh:
        tokens = fh.read().split()
    M = int(tokens[0])
    vals = np.array([float(t) for t in tokens[1:]])
    if vals.size != (M + 1) ** 2:
        raise ValueError(f"{path}: expected {(M + 1) ** 2} values, found {vals.size}")
    return GridField(M, vals.reshape(M + 1, M + 1))


# cosine spectrum --------------------------------------------------------------

@dataclass(frozen=True)
class SpectralCoeffs:
    """Coefficients on the orthonormal cosine basis; ``coeffs[l, k]`` pairs with
    cos(pi k x) cos(pi l y). The (0, 0) entry is the field mean."""

    M: int
    coeffs: np.ndarray

    @property
    def wavenumbers_sq(self) -> np.ndarray:
        k = np.arange(self.M + 1)
        return k[None, :] ** 2 + k[:, None] ** 2


def _basis_scale(M):
    c = np.full(M + 1, math.sqrt(2.0))
    c[0] = c[-1] = 1.0
    return c


def cosine_coefficients(f: GridField) -> SpectralCoeffs:
    """Exact discrete expansion w.r.t. the trapezoid inner product (DCT-I)."""
    M = f.M
    c = _basis_scale(M)
    raw = fft.dctn(f.values, type=1) * (0.5 / M) ** 2
    return SpectralCoeffs(M, raw * np.outer(c, c))


def cosine_synthesis(s: SpectralCoeffs) -> GridField:
    M = s.M
    c = _basis_scale(M)
    a = s.coeffs * np.outer(c, c)
    half = np.full(M + 1, 0.5)
    half[0] = half[-1] = 1.0
    a = a * np.outer(half, half)
    return GridField(M, fft.dctn(a, type=1))


def hminus1_norm(charge: GridField) -> float:
    """Squared homogeneous H^-1 norm, int |grad Lap^-1 nu|^2 with Neumann conditions.

    The mean is projected out first; a noticeable projection is logged.
    """
    nu, mu = project_zero_mean(charge)
    if abs(mu) > 1e-10 * max(1.0, math.sqrt(charge.l2_norm_sq())):
        log.info("hminus1_norm: projected out mean %.3e", mu)
    s = cosine_coefficients(nu)
    k2 = s.wavenumbers_sq.astype(float)
    k2[0, 0] = np.inf
    return float((s.coeffs ** 2 / (np.pi ** 2 * k2)).sum())


# weighted Poisson -------------------------------------------------------------

def _conductivities(rho):
    r = rho.values
    kx = 2.0 * r[:, :-1] * r[:, 1:] / (r[:, :-1] + r[:, 1:])     # faces between (j, i) and (j, i+1)
    ky = 2.0 * r[:-1, :] * r[1:, :] / (r[:-1, :] + r[1:, :])
    kx[0, :] *= 0.5
    kx[-1, :] *= 0.5
    ky[:, 0] *= 0.5
    ky[:, -1] *= 0.5
    return kx, ky


def _apply(kx, ky, phi):
    out = np.zeros_like(phi)
    fx = kx * (phi[:, :-1] - phi[:, 1:])
    out[:, :-1] += fx
    out[:, 1:] -= fx
    fy = ky * (phi[:-1, :] - phi[1:, :])
    out[:-1, :] += fy
    out[1:, :] -= fy
    return out


class _UnitInverse:
    """Pseudo-inverse of the unit-conductivity operator via DCT-I."""

    def __init__(self, M):
        self.M = M
        w = trapezoid_weights(M)
        self.areas = np.outer(w, w)
        lam = (2.0 - 2.0 * np.cos(np.pi * np.arange(M + 1) / M)) * M * M
        denom = lam[None, :] + lam[:, None]
        denom[0, 0] = np.inf
        self.inv = 1.0 / denom

    def __call__(self, r):
        s = cosine_coefficients(GridField(self.M, r / self.areas))
        return cosine_synthesis(SpectralCoeffs(self.M, s.coeffs * self.inv)).values


def operator_apply(rho: GridField, phi: GridField) -> GridField:
    """Net rho-weighted flux out of each control volume, i.e. A phi."""
    kx, ky = _conductivities(rho)
    return GridField(phi.M, _apply(kx, ky, phi.values))


def solve_weighted_poisson(rho: GridField, charge: GridField, tol: float = 1e-10,
                           maxiter: int = 2000) -> GridField:
    """Solve div(rho grad phi) = -charge with Neumann conditions and int phi rho = 0.

    ``charge`` is a density (per unit area) on the vertices; its mean is
    projected out. Returns the vertex values of phi.
    """
    if rho.M != charge.M:
        raise ValueError("rho and charge must share the grid")
    if np.any(rho.values <= 0):
        raise NotPositiveWeight(f"conductivity must be positive (min {rho.values.min()})")
    nu, _ = project_zero_mean(charge)
    areas = nu.areas
    b = nu.values * areas
    b -= b.mean()                       # exact discrete compatibility
    kx, ky = _conductivities(rho)
    precond = _UnitInverse(rho.M)
    bnorm = np.linalg.norm(b)
    phi = np.zeros_like(b)
    if bnorm == 0:
        return GridField(rho.M, phi)
    r = b.copy()
    z = precond(r)
    p = z.copy()
    rz = np.vdot(r, z)
    for it in range(maxiter):
        Ap = _apply(kx, ky, p)
        alpha = rz / np.vdot(p, Ap)
        phi += alpha * p
        r -= alpha * Ap
        r -= r.mean()
        if np.linalg.norm(r) <= tol * bnorm:
            break
        z = precond(r)
        rz_new = np.vdot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    else:
        raise SolverDiverged(f"CG did not reach relative residual {tol} in {maxiter} iterations")
    # enforce int phi rho = 0
    wr = areas * rho.values
    phi -= (wr * phi).sum() / wr.sum()
    return GridField(rho.M, phi)


def dirichlet_energy(rho: GridField, phi: GridField) -> float:
    """Discrete int rho |grad phi|^2 (face-based, consistent with the solver)."""
    kx, ky = _conductivities(rho)
    v = phi.values
    return float((kx * np.diff(v, axis=1) ** 2).sum() + (ky * np.diff(v, axis=0) ** 2).sum())


def point_charge(rho: GridField, z) -> GridField:
    """Unit mass in the control volume of vertex ``z`` minus the rho background."""
    M = rho.M
    i = int(round(z[0] * M))
    j = int(round(z[1] * M))
    if abs(i - z[0] * M) > 1e-9 or abs(j - z[1] * M) > 1e-9:
        raise ValueError(f"z = {tuple(z)} is not a grid vertex at M = {M}")
    areas = rho.areas
    q = -rho.values / (areas * rho.values).sum()
    q[j, i] += 1.0 / areas[j, i]
    return GridField(M, q)


def green_function(model: DensityModel, z, M: int) -> GridField:
    _require_positive(model)
    rho = GridField.from_model(model, M)
    return solve_weighted_poisson(rho, point_charge(rho, z))


def green_singular_coefficient(model: DensityModel, z, M: int, annulus=None) -> float:
    """Least-squares slope of phi_z against -log|x - z| over an annulus around z.

    For a smooth density the slope estimates 1 / (2 pi rho(z)).
    """
    _require_positive(model)
    z = np.asarray(z, dtype=np.float64)
    if min(z[0], z[1], 1 - z[0], 1 - z[1]) < 0.25 - 1e-12:
        raise ValueError("z must be at distance >= 1/4 from the boundary")
    r_in, r_out = annulus if annulus is not None else (4.0 / M, 1.0 / 8.0)
    phi = green_function(model, z, M)
    g = np.linspace(0.0, 1.0, M + 1)
    X, Y = np.meshgrid(g, g)
    r = np.hypot(X - z[0], Y - z[1])
    sel = (r >= r_in) & (r <= r_out)
    if sel.sum() < 50:
        raise RegressionIllConditioned(f"only {int(sel.sum())} samples in the annulus [{r_in}, {r_out}]")
    A = np.column_stack([-np.log(r[sel]), np.ones(sel.sum())])
    coef, *_ = np.linalg.lstsq(A, phi.values[sel], rcond=None)
    return float(coef[0])


# cutoff predictions -----------------------------------------------------------

def fourier_cutoff_prediction(N: float) -> float:
    """(2/pi^2) sum over k in N^2 minus 0 with |k|^2 <= N of 1/|k|^2."""
    if N < 1:
        return 0.0
    n = int(math.floor(N))
    K = math.isqrt(n)
    b = np.arange(K + 1, dtype=np.int64)
    total = 0.0
    for start in range(0, K + 1, 1024):
        a = np.arange(start, min(start + 1024, K + 1), dtype=np.int64)
        k2 = a[:, None] ** 2 + b[None, :] ** 2
        keep = (k2 > 0) & (k2 <= n)
        total += (1.0 / k2[keep]).sum()
    return float(2.0 / np.pi ** 2 * total)


def heat_cutoff_prediction(N: float) -> float:
    """Leading term log(N) / (2 pi) of the heat-kernel-regularised cost."""
    if N < 2:
        raise ValueError("N must be >= 2")
    return math.log(N) / (2.0 * math.pi)


# W2 sandwich ------------------------------------------------------------------

@dataclass(frozen=True)
class SandwichReport:
    lower: float
    w2: float
    upper: float
    slack: float
    holds: bool


def _as_density(f: GridField) -> SmoothSampled:
    if np.any(f.values <= 0):
        raise NotPositiveWeight("sandwich densities must be positive")
    model = SmoothSampled(f.values)
    if abs(model.total_mass - 1.0) > 1e-9:
        raise NotNormalized(f"density integrates to {model.total_mass!r}")
    return model


def sandwich_check(nu1: GridField, nu2: GridField, M: int = 32,
                   spectral_M: int = 256) -> SandwichReport:
    """Check b^-1/2 |nu1 - nu2|_H-1 <= W2(nu1, nu2) <= a^-1/2 |nu1 - nu2|_H-1.

    Both fields are read as bilinear densities. W2 is estimated by exact
    transport between the M x M barycentric discretisations; the true W2 lies
    within ``slack`` of that estimate, where ``slack`` is the sum of the square
    roots of the two collapse costs.
    """
    m1, m2 = _as_density(nu1), _as_density(nu2)
    a = min(m1.lower_bound, m2.lower_bound)
    b = max(m1.upper_bound, m2.upper_bound)
    diff = GridField.from_model(m1, spectral_M) - GridField.from_model(m2, spectral_M)
    h = math.sqrt(hminus1_norm(diff))
    d1, d2 = discretize_measure(m1, M), discretize_measure(m2, M)
    plan = solve_transportation(d1.points, d1.masses, d2.points, d2.masses)
    w2 = math.sqrt(max(plan.cost, 0.0))
    slack = math.sqrt(d1.collapse_cost) + math.sqrt(d2.collapse_cost)
    lower, upper = h / math.sqrt(b), h / math.sqrt(a)
    holds = (lower - slack <= w2 <= upper + slack)
    return SandwichReport(lower, w2, upper, slack, bool(holds))
