"""W2^2 between an empirical measure and an absolutely continuous density.

The density is collapsed to one atom per grid cell, placed at the cell's mass
barycenter. The discrete problem gives ``raw``; adding the exact cost of the
collapse, sum_k int_{Q_k} rho |x - b_k|^2, gives ``corrected``. ``corrected`` is
the cost of an admissible coupling of X^N and rho, hence an upper bound on the
true value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .density import DensityModel, _require_normalized, _require_positive, grid_moments
from .errors import ProblemTooLarge
from .transport import DEFAULT_MAX_ARCS, as_cloud, solve_transportation


@dataclass(frozen=True)
class DiscretizedMeasure:
    M: int
    points: np.ndarray       # (M*M, 2) barycenters, row-major from the bottom row
    masses: np.ndarray       # (M*M,)
    spread: np.ndarray       # (M*M,) within-cell second moments about the barycenter

    @property
    def collapse_cost(self) -> float:
        return math.fsum(self.spread)


def default_resolution(N: int, max_arcs: int = DEFAULT_MAX_ARCS) -> int:
    """ceil(4 sqrt(N)), reduced until N * M^2 fits in ``max_arcs``."""
    M = math.ceil(4 * math.sqrt(N))
    while M > 1 and N * M * M > max_arcs:
        M -= 1
    return M


def discretize_measure(model: DensityModel, M: int) -> DiscretizedMeasure:
    _require_positive(model)
    _require_normalized(model)
    g = grid_moments(model, M)
    x0, y0, x1, y1 = model.bounds
    cx = x0 + (np.arange(M) + 0.5) * (x1 - x0) / M
    cy = y0 + (np.arange(M) + 0.5) * (y1 - y0) / M
    mass = g["mass"]
    dx = g["mx"] / mass
    dy = g["my"] / mass
    spread = np.maximum(g["m2"] - mass * (dx * dx + dy * dy), 0.0)
    pts = np.stack([cx[None, :] + dx, cy[:, None] + dy], axis=-1).reshape(-1, 2)
    return DiscretizedMeasure(M, pts, mass.ravel(), spread.ravel())


def w2_to_density(X, model: DensityModel, M: int | None = None,
                  max_arcs: int = DEFAULT_MAX_ARCS, method: str = "auto") -> tuple[float, float]:
    """Return ``(raw, corrected)`` estimates of W2^2(X^N, model)."""
    X = as_cloud(X)
    N = X.shape[0]
    if M is None:
        M = default_resolution(N, max_arcs)
    if N * M * M > max_arcs:
        raise ProblemTooLarge(f"N * M^2 = {N * M * M} exceeds {max_arcs} arcs")
    disc = discretize_measure(model, M)
    plan = solve_transportation(X, np.full(N, 1.0 / N), disc.points, disc.masses,
                                max_arcs=max_arcs, method=method)
    return plan.cost, plan.cost + disc.collapse_cost
