"""Exact optimal matching and discrete transport with squared Euclidean cost.

Both solvers are successive-shortest-path methods with dual potentials.
Costs are evaluated on the fly from the coordinates, so memory stays linear
in the number of points for the assignment solver.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import sparse

from .errors import MassImbalance, OutOfDomain, ProblemTooLarge, SizeMismatch, TooLarge

BRUTE_FORCE_MAX = 10
DEFAULT_MAX_ARCS = 2**26
DOMAIN_TOL = 1e-12
SSP_MAX_ARCS = 2**16
NETWORK_SIMPLEX_MAXITER = 10**9


@dataclass(frozen=True)
class Assignment:
    """Optimal matching ``x[i] -> y[perm[i]]``.

    ``row_potential`` and ``col_potential`` are the final duals: the reduced
    cost ``|x_i - y_j|^2 - row_potential[i] - col_potential[j]`` is
    nonnegative everywhere and zero on matched pairs.
    """

    perm: np.ndarray
    cost: float
    row_potential: np.ndarray | None = field(default=None, repr=False)
    col_potential: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class TransportPlan:
    source_mass: np.ndarray
    sink_mass: np.ndarray
    flows: sparse.csr_matrix
    cost: float
    source_potential: np.ndarray | None = field(default=None, repr=False)
    sink_potential: np.ndarray | None = field(default=None, repr=False)

    def triples(self):
        """Yield ``(i, j, flow)`` for every arc carrying mass."""
        coo = self.flows.tocoo()
        order = np.lexsort((coo.col, coo.row))
        for k in order:
            yield int(coo.row[k]), int(coo.col[k]), float(coo.data[k])


def as_cloud(points, domain_tol=DOMAIN_TOL, check_domain=True) -> np.ndarray:
    """Validate a point cloud and return it as a float (N, 2) array."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim == 1 and pts.size == 2:
        pts = pts.reshape(1, 2)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
        raise ValueError(f"point cloud must have shape (N, 2) with N >= 1, got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("point cloud contains non-finite coordinates")
    if check_domain and (pts.min() < -domain_tol or pts.max() > 1 + domain_tol):
        raise OutOfDomain("point cloud leaves the unit square")
    return pts


def pair_costs(X, Y, perm) -> np.ndarray:
    d = X - Y[perm]
    return d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1]


def matching_cost(X, Y, perm) -> float:
    # fsum makes the total independent of pair order, hence exactly symmetric.
    return math.fsum(pair_costs(X, Y, perm))


def _check_pair(X, Y, check_domain):
    X = as_cloud(X, check_domain=check_domain)
    Y = as_cloud(Y, check_domain=check_domain)
    if X.shape[0] != Y.shape[0]:
        raise SizeMismatch(f"|X| = {X.shape[0]} but |Y| = {Y.shape[0]}")
    return X, Y


def brute_force_assignment(X, Y) -> Assignment:
    """Enumerate all permutations; the lexicographically first minimizer wins."""
    X, Y = _check_pair(X, Y, check_domain=False)
    n = X.shape[0]
    if n > BRUTE_FORCE_MAX:
        raise TooLarge(f"brute force is limited to N <= {BRUTE_FORCE_MAX}, got {n}")
    C = ((X[:, None, :] - Y[None, :, :]) ** 2).sum(axis=2)
    rows = np.arange(n)
    best_cost, best_perm = np.inf, None
    perms = itertools.permutations(range(n))
    while True:
        chunk = np.array(list(itertools.islice(perms, 200_000)), dtype=np.int64)
        if chunk.size == 0:
            break
        totals = C[rows, chunk].sum(axis=1)
        k = int(np.argmin(totals))  # first occurrence, so lexicographic order is kept
        if totals[k] < best_cost:
            best_cost, best_perm = float(totals[k]), chunk[k].copy()
    return Assignment(best_perm, matching_cost(X, Y, best_perm))


@numba.njit(cache=True)
def _sq(ax, ay, bx, by):
    dx = ax - bx
    dy = ay - by
    return dx * dx + dy * dy


@numba.njit(cache=True)
def _lsap(X, Y):
    # Shortest augmenting path assignment (rows <= cols). Each row is inserted
    # by a Dijkstra search over reduced costs, stopped at the first free column.
    nr = X.shape[0]
    nc = Y.shape[0]
    u = np.zeros(nr)
    v = np.zeros(nc)
    col4row = np.full(nr, -1, np.int64)
    row4col = np.full(nc, -1, np.int64)
    path = np.full(nc, -1, np.int64)
    dist = np.empty(nc)
    remaining = np.empty(nc, np.int64)
    scanned_rows = np.empty(nr, np.int64)
    scanned_cols = np.empty(nc, np.int64)
    for cur in range(nr):
        for j in range(nc):
            dist[j] = np.inf
            remaining[j] = j
        n_rem = nc
        n_sr = 0
        n_sc = 0
        min_val = 0.0
        sink = -1
        i = cur
        while sink == -1:
            scanned_rows[n_sr] = i
            n_sr += 1
            xi = X[i, 0]
            yi = X[i, 1]
            ui = u[i]
            best = -1
            lowest = np.inf
            best_j = nc
            for it in range(n_rem):
                j = remaining[it]
                r = min_val + _sq(xi, yi, Y[j, 0], Y[j, 1]) - ui - v[j]
                if r < dist[j]:
                    path[j] = i
                    dist[j] = r
                d = dist[j]
                if d < lowest:
                    lowest = d
                    best = it
                    best_j = j
                elif d == lowest:
                    # ties: prefer a free column, then the lowest index
                    free_j = row4col[j] == -1
                    free_b = row4col[best_j] == -1
                    if (free_j and not free_b) or (free_j == free_b and j < best_j):
                        best = it
                        best_j = j
            min_val = lowest
            j = remaining[best]
            scanned_cols[n_sc] = j
            n_sc += 1
            n_rem -= 1
            remaining[best] = remaining[n_rem]
            if row4col[j] == -1:
                sink = j
            else:
                i = row4col[j]
        u[cur] += min_val
        for k in range(n_sr):
            i = scanned_rows[k]
            if i != cur:
                u[i] += min_val - dist[col4row[i]]
        for k in range(n_sc):
            j = scanned_cols[k]
            v[j] -= min_val - dist[j]
        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            nxt = col4row[i]
            col4row[i] = j
            j = nxt
            if i == cur:
                break
    return col4row, u, v


def solve_rectangular(X, Y) -> Assignment:
    """Optimal injection of the rows ``X`` into the columns ``Y`` (requires |X| <= |Y|)."""
    X = as_cloud(X, check_domain=False)
    Y = as_cloud(Y, check_domain=False)
    if X.shape[0] > Y.shape[0]:
        raise SizeMismatch("rectangular assignment needs |X| <= |Y|")
    perm, u, v = _lsap(X, Y)
    return Assignment(perm, matching_cost(X, Y, perm), u, v)


def solve_assignment(X, Y, check_domain=True) -> Assignment:
    """Exact minimum of sum |x_i - y_perm(i)|^2 over permutations, O(N^3) worst case."""
    X, Y = _check_pair(X, Y, check_domain)
    perm, u, v = _lsap(X, Y)
    return Assignment(perm, matching_cost(X, Y, perm), u, v)


def check_optimality(X, Y, assignment: Assignment, tol=1e-9) -> bool:
    """Complementary slackness certificate for an assignment carrying duals."""
    X = np.asarray(X, float)
    Y = np.asarray(Y, float)
    u, v = assignment.row_potential, assignment.col_potential
    if u is None or v is None:
        raise ValueError("assignment carries no dual potentials")
    perm = np.asarray(assignment.perm)
    if len(np.unique(perm)) != len(perm):
        return False
    scale = max(1.0, float(np.abs(u).max()), float(np.abs(v).max()))
    for start in range(0, X.shape[0], 1024):
        xs = X[start:start + 1024]
        C = ((xs[:, None, :] - Y[None, :, :]) ** 2).sum(axis=2)
        red = C - u[start:start + 1024, None] - v[None, :]
        if red.min() < -tol * scale:
            return False
    red_matched = pair_costs(X, Y, perm) - u - v[perm]
    return bool(np.abs(red_matched).max() <= tol * scale)


def monotone_1d(x, y) -> Assignment:
    """Optimal matching on a line: order statistics are paired."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise SizeMismatch(f"|x| = {x.size} but |y| = {y.size}")
    ix = np.argsort(x, kind="stable")
    iy = np.argsort(y, kind="stable")
    perm = np.empty_like(ix)
    perm[ix] = iy
    d = x - y[perm]
    return Assignment(perm, math.fsum(d * d))


def empirical_w2(X, Y) -> float:
    """Squared 2-Wasserstein distance between two equal-size empirical measures."""
    X, Y = _check_pair(X, Y, check_domain=True)
    return solve_assignment(X, Y).cost / X.shape[0]


@numba.njit(cache=True)
def _relax(i, di, P, Q, u, v, remaining, n_rem, dsnk, pred_snk):
    xi = P[i, 0]
    yi = P[i, 1]
    ui = u[i]
    for it in range(n_rem):
        j = remaining[it]
        r = di + _sq(xi, yi, Q[j, 0], Q[j, 1]) - ui - v[j]
        if r < dsnk[j]:
            dsnk[j] = r
            pred_snk[j] = i


@numba.njit(cache=True)
def _ssp_transport(P, a, Q, b, eps):
    # Successive shortest paths on the complete bipartite residual graph.
    # Source rows are filled one at a time; each augmentation runs Dijkstra
    # from the current source and stops at the first sink with spare demand.
    n = P.shape[0]
    m = Q.shape[0]
    flow = np.zeros((n, m))
    u = np.empty(n)
    v = np.zeros(m)
    for i in range(n):
        lo = np.inf
        for j in range(m):
            c = _sq(P[i, 0], P[i, 1], Q[j, 0], Q[j, 1])
            if c < lo:
                lo = c
        u[i] = lo
    supply = a.copy()
    demand = b.copy()
    dsnk = np.empty(m)
    dsrc = np.empty(n)
    pred_snk = np.empty(m, np.int64)
    pred_src = np.empty(n, np.int64)
    labeled = np.zeros(n, np.bool_)
    remaining = np.empty(m, np.int64)
    lab_list = np.empty(n, np.int64)
    scn_list = np.empty(m, np.int64)
    for s in range(n):
        while supply[s] > eps:
            for j in range(m):
                dsnk[j] = np.inf
                remaining[j] = j
            n_rem = m
            n_scn = 0
            dsrc[s] = 0.0
            pred_src[s] = -1
            labeled[s] = True
            lab_list[0] = s
            n_lab = 1
            _relax(s, 0.0, P, Q, u, v, remaining, n_rem, dsnk, pred_snk)
            sink = -1
            dmin = 0.0
            while n_rem > 0:
                best = 0
                lowest = dsnk[remaining[0]]
                for it in range(1, n_rem):
                    d = dsnk[remaining[it]]
                    if d < lowest:
                        lowest = d
                        best = it
                if lowest == np.inf:
                    break
                j = remaining[best]
                n_rem -= 1
                remaining[best] = remaining[n_rem]
                scn_list[n_scn] = j
                n_scn += 1
                dmin = lowest
                if demand[j] > eps:
                    sink = j
                    break
                # backward arcs j -> k are tight, so k inherits j's distance
                for k in range(n):
                    if flow[k, j] > 0.0 and not labeled[k]:
                        labeled[k] = True
                        dsrc[k] = dmin
                        pred_src[k] = j
                        lab_list[n_lab] = k
                        n_lab += 1
                        _relax(k, dmin, P, Q, u, v, remaining, n_rem, dsnk, pred_snk)
            if sink == -1:
                # no sink with spare demand is reachable: masses exhausted
                for k in range(n_lab):
                    labeled[lab_list[k]] = False
                supply[s] = 0.0
                break
            for k in range(n_lab):
                ii = lab_list[k]
                u[ii] += dmin - dsrc[ii]
                labeled[ii] = False
            for k in range(n_scn):
                jj = scn_list[k]
                v[jj] -= dmin - dsnk[jj]
            # bottleneck along the path
            delta = min(supply[s], demand[sink])
            j = sink
            while True:
                i = pred_snk[j]
                jb = pred_src[i]
                if jb == -1:
                    break
                if flow[i, jb] < delta:
                    delta = flow[i, jb]
                j = jb
            j = sink
            while True:
                i = pred_snk[j]
                flow[i, j] += delta
                jb = pred_src[i]
                if jb == -1:
                    break
                if flow[i, jb] == delta:
                    flow[i, jb] = 0.0
                else:
                    flow[i, jb] -= delta
                j = jb
            if supply[s] == delta:
                supply[s] = 0.0
            else:
                supply[s] -= delta
            if demand[sink] == delta:
                demand[sink] = 0.0
            else:
                demand[sink] -= delta
    return flow, u, v


def _as_atoms(points, masses, name):
    pts = as_cloud(points, check_domain=False)
    w = np.ascontiguousarray(masses, dtype=np.float64).ravel()
    if w.shape[0] != pts.shape[0]:
        raise SizeMismatch(f"{name}: {pts.shape[0]} points but {w.shape[0]} masses")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError(f"{name}: masses must be finite and nonnegative")
    return pts, w


def _network_simplex(P, a, Q, b):
    for key in ("PYTORCH", "JAX", "CUPY", "TENSORFLOW"):
        os.environ.setdefault(f"POT_BACKEND_DISABLE_{key}", "1")
    import ot

    C = ((P[:, None, :] - Q[None, :, :]) ** 2).sum(axis=2)
    G, log = ot.emd(a, b * (a.sum() / b.sum()), C, numItermax=NETWORK_SIMPLEX_MAXITER, log=True)
    if log["warning"] is not None:
        raise RuntimeError(f"network simplex did not converge: {log['warning']}")
    return G, log["u"], log["v"]


def solve_transportation(sources, source_mass, sinks, sink_mass,
                         max_arcs=DEFAULT_MAX_ARCS, mass_tol=1e-9, method="auto") -> TransportPlan:
    """Exact optimal plan between two weighted atom sets (squared Euclidean cost).

    ``method`` is ``"ssp"`` (successive shortest paths, compiled here),
    ``"network_simplex"`` (POT's C++ solver) or ``"auto"``, which uses the
    shortest-path solver up to ``SSP_MAX_ARCS`` arcs. Zero-mass atoms are
    dropped before solving and come back as empty rows/columns of the plan.
    """
    P, a = _as_atoms(sources, source_mass, "sources")
    Q, b = _as_atoms(sinks, sink_mass, "sinks")
    ta, tb = math.fsum(a), math.fsum(b)
    if abs(ta - 1.0) > mass_tol or abs(tb - 1.0) > mass_tol:
        raise MassImbalance(f"source mass {ta!r} and sink mass {tb!r} must both equal 1")
    ia = np.flatnonzero(a > 0)
    ib = np.flatnonzero(b > 0)
    arcs = ia.size * ib.size
    if arcs > max_arcs:
        raise ProblemTooLarge(f"{ia.size} x {ib.size} arcs exceed the limit {max_arcs}")
    if method == "auto":
        method = "ssp" if arcs <= SSP_MAX_ARCS else "network_simplex"
    if method == "ssp":
        eps = 1e-15 * max(ta, tb)
        flow, u, v = _ssp_transport(P[ia], a[ia], Q[ib], b[ib], eps)
    elif method == "network_simplex":
        flow, u, v = _network_simplex(P[ia], a[ia], Q[ib], b[ib])
    else:
        raise ValueError(f"unknown transport method {method!r}")
    rows, cols = np.nonzero(flow)
    vals = flow[rows, cols]
    d = P[ia][rows] - Q[ib][cols]
    cost = math.fsum(vals * (d[:, 0] ** 2 + d[:, 1] ** 2))
    flows = sparse.csr_matrix((vals, (ia[rows], ib[cols])), shape=(len(a), len(b)))
    su = np.zeros(len(a))
    su[ia] = u
    sv = np.zeros(len(b))
    sv[ib] = v
    return TransportPlan(a, b, flows, cost, su, sv)


# Plain-text formats ----------------------------------------------------------

def write_cloud(path, points) -> None:
    """Header ``N`` then one ``x y`` line per point; ``path`` may be an open stream."""
    pts = as_cloud(points, check_domain=False)
    text = f"{pts.shape[0]}\n" + "".join(f"{x:.17g} {y:.17g}\n" for x, y in pts)
    if hasattr(path, "write"):
        path.write(text)
        return
    with open(path, "w") as fh:
        fh.write(text)


def read_cloud(path) -> np.ndarray:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty point cloud file")
    try:
        n = int(lines[0])
        pts = np.array([[float(t) for t in ln.split()] for ln in lines[1:]], dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"{path}: malformed point cloud ({exc})") from None
    if pts.shape != (n, 2):
        raise ValueError(f"{path}: header says {n} points, found {len(lines) - 1} rows")
    return as_cloud(pts)


def write_plan(path, plan: TransportPlan) -> None:
    with open(path, "w") as fh:
        for i, j, f in plan.triples():
            fh.write(f"{i} {j} {f:.17g}\n")


def write_assignment(path, assignment: Assignment) -> None:
    n = len(assignment.perm)
    with open(path, "w") as fh:
        for i, j in enumerate(assignment.perm):
            fh.write(f"{i} {int(j)} {1.0 / n:.17g}\n")
