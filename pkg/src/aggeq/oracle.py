"""Independent brute-force references used to validate the numerical paths.

These deliberately share no arithmetic with the components they check: the
projection oracle enumerates active-set patterns instead of water-filling,
the equilibrium oracle runs grid best responses instead of subgradient
steps, and price curves are re-evaluated by a linear scan over the raw
piece triples.  Desk-scale instances only.
"""

from __future__ import annotations

import itertools
from typing import NamedTuple

import numpy as np

from .projection import BoxSimplexSet

_TOL = 1e-9


def qp_project_oracle(s: BoxSimplexSet, v) -> np.ndarray:
    """Exact projection by exhaustive KKT enumeration over the 3^T patterns
    of active bounds; limited to T <= 6."""
    t_dim = s.dim
    if t_dim > 6:
        raise ValueError("oracle limited to T <= 6")
    v = np.asarray(v, dtype=float)
    lo, up = s.lower, s.upper
    if s.energy is None:
        out = np.empty(t_dim)
        for i in range(t_dim):
            if v[i] < lo[i]:
                out[i] = lo[i]
            elif v[i] > up[i]:
                out[i] = up[i]
            else:
                out[i] = v[i]
        return out

    e = s.energy
    best_x, best_obj = None, np.inf
    for pattern in itertools.product((0, 1, 2), repeat=t_dim):
        at_low = [i for i, p in enumerate(pattern) if p == 0]
        free = [i for i, p in enumerate(pattern) if p == 1]
        at_up = [i for i, p in enumerate(pattern) if p == 2]
        x = np.empty(t_dim)
        x[at_low] = lo[at_low]
        x[at_up] = up[at_up]
        if free:
            mu = (v[free].sum() + x[at_low].sum() + x[at_up].sum() - e) / len(free)
            x[free] = v[free] - mu
            if np.any(x[free] < lo[free] - _TOL) or np.any(x[free] > up[free] + _TOL):
                continue
        else:
            if abs(x.sum() - e) > _TOL * max(1.0, abs(e)):
                continue
            mu_lo = max((v[i] - lo[i] for i in at_low), default=-np.inf)
            mu_hi = min((v[i] - up[i] for i in at_up), default=np.inf)
            if mu_lo > mu_hi + _TOL:
                continue
            mu = mu_lo if np.isfinite(mu_lo) else (mu_hi if np.isfinite(mu_hi) else 0.0)
        # multiplier sign conditions at the active bounds
        if any(v[i] - mu > lo[i] + _TOL for i in at_low):
            continue
        if any(v[i] - mu < up[i] - _TOL for i in at_up):
            continue
        obj = float(np.sum((x - v) ** 2))
        if obj < best_obj - 1e-15:
            best_obj, best_x = obj, x
    if best_x is None:
        raise RuntimeError("no KKT-consistent pattern found (should not happen)")
    return best_x


def _price_scan(pieces: list, load: float) -> float:
    """Piecewise price by linear scan over [start, intercept, slope] rows;
    extends the first piece below its start."""
    value = pieces[0][1] + pieces[0][2] * load
    for start, intercept, slope in pieces[1:]:
        if load >= start:
            value = intercept + slope * load
    return value


class OracleEquilibrium(NamedTuple):
    profile: np.ndarray
    aggregate: float
    converged: bool


def grid_equilibrium_oracle(game, mode: str = "vne", step: float = 1e-4,
                            max_sweeps: int = 2000) -> OracleEquilibrium:
    """Equilibrium of a tiny game (N <= 2, T = 1) by damped best-response
    iteration on action grids of the given step.

    The best response of the atomic mode re-prices the aggregate at each
    candidate deviation; the population mode holds the aggregate fixed.
    A single coupling row restricts the deviation grids.  The fixed point
    is verified before returning, so a converged result certifies the
    equilibrium condition at grid resolution.
    """
    if game.horizon != 1 or game.n_players > 2:
        raise ValueError("oracle limited to N <= 2, T = 1")
    if game.coupling is not None and game.coupling.n_rows > 1:
        raise ValueError("oracle supports at most one coupling row")
    pieces = game.prices[0].pieces()
    scale = 1.0 / game.n_players if game.convention == "average" else 1.0

    grids = []
    for p in game.players:
        if p.energy is not None:
            grids.append(np.array([p.energy]))
        else:
            grids.append(np.arange(p.lower[0], p.upper[0] + step / 2, step))

    def own_cost(n, z, agg):
        p = game.players[n]
        c = np.array([_price_scan(pieces, a) for a in np.atleast_1d(agg)])
        return z * c + p.omega * (z - p.preferred[0]) ** 2

    x = np.array([float(p.preferred[0]) for p in game.players])
    for n, grid in enumerate(grids):
        x[n] = grid[np.argmin(np.abs(grid - x[n]))]

    def best_responses(cur):
        responses = np.empty_like(cur)
        for n, grid in enumerate(grids):
            others = cur.sum() - cur[n]
            if mode == "vne":
                aggs = (others + grid) * scale
            else:
                aggs = np.full(grid.shape, (others + cur[n]) * scale)
            costs = own_cost(n, grid, aggs)
            if game.coupling is not None:
                a_row = float(game.coupling.matrix[0, 0])
                b_val = float(game.coupling.rhs[0])
                feasible = a_row * (others + grid) * scale <= b_val + 1e-9
                costs = np.where(feasible, costs, np.inf)
            responses[n] = grid[np.argmin(costs)]
        return responses

    converged = False
    for _ in range(max_sweeps):
        br = best_responses(x)
        if np.max(np.abs(br - x)) <= step / 2:
            x = br
            converged = True
            break
        x = 0.5 * (x + br)
        for n, grid in enumerate(grids):
            x[n] = grid[np.argmin(np.abs(grid - x[n]))]
    if converged:
        converged = bool(np.max(np.abs(best_responses(x) - x)) <= step)
    return OracleEquilibrium(profile=x.reshape(-1, 1),
                             aggregate=float(x.sum() * scale),
                             converged=converged)


def exhaustive_kmeans(points, k: int) -> float:
    """Global optimum of the size-weighted variance clustering objective by
    enumerating every label assignment; N <= 10, k <= 3."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[0]
    if n > 10 or k > 3:
        raise ValueError("oracle limited to N <= 10, k <= 3")
    if k < 1:
        raise ValueError("need k >= 1")
    best = np.inf
    for labels in itertools.product(range(k), repeat=n):
        lab = np.asarray(labels)
        total = 0.0
        for j in range(k):
            rows = points[lab == j]
            if rows.shape[0]:
                total += float(np.sum((rows - rows.mean(axis=0)) ** 2))
        best = min(best, total)
    return best


def grid_inradius(s: BoxSimplexSet, step: float = 1e-3) -> float:
    """Inradius by maximizing, over a grid of interior candidates, the exact
    distance to each facet's affine hull (T <= 3 with a budget, T <= 2
    without).  Assumes every facet of the box actually meets the set."""
    t_dim = s.dim
    lo, up = s.lower, s.upper

    def face_projectors():
        # affine subspaces: optionally the budget hyperplane, plus x_i = bound
        faces = []
        for i in range(t_dim):
            for bound in (lo[i], up[i]):
                rows = [np.eye(t_dim)[i]]
                rhs = [bound]
                if s.energy is not None:
                    rows.append(np.ones(t_dim))
                    rhs.append(s.energy)
                a = np.vstack(rows)
                b = np.array(rhs)
                pinv = np.linalg.pinv(a)
                faces.append((np.eye(t_dim) - pinv @ a, pinv @ b))
        return faces

    faces = face_projectors()

    def dist_to_boundary(x):
        best = np.inf
        for proj, offset in faces:
            z = proj @ x + offset
            best = min(best, float(np.linalg.norm(z - x)))
        return best

    if s.energy is None:
        if t_dim > 2:
            raise ValueError("grid oracle limited to T <= 2 without budget")
        axes = [np.arange(lo[i], up[i] + step / 2, step) for i in range(t_dim)]
        best = 0.0
        for point in itertools.product(*axes):
            best = max(best, dist_to_boundary(np.array(point)))
        return best

    if t_dim > 3:
        raise ValueError("grid oracle limited to T <= 3 with a budget")
    axes = [np.arange(lo[i], up[i] + step / 2, step) for i in range(t_dim - 1)]
    mesh = np.meshgrid(*axes, indexing="ij") if axes else []
    pts = np.stack([m.ravel() for m in mesh], axis=1) if axes else np.zeros((1, 0))
    last = s.energy - pts.sum(axis=1)
    keep = (last >= lo[-1] - 1e-12) & (last <= up[-1] + 1e-12)
    pts = np.column_stack([pts[keep], last[keep]])
    best = 0.0
    for x in pts:
        best = max(best, dist_to_boundary(x))
    return best
