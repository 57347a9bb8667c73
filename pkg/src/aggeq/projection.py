"""Euclidean projections and set geometry for box/budget action sets.

The action set of a player is a box ``lower <= x <= upper``, optionally
intersected with the budget hyperplane ``sum(x) == energy``.  Projections
onto these sets reduce to a one dimensional water-filling search for the
hyperplane multiplier, which makes them cheap enough to run inside the
equilibrium solver's inner loop.  The module also provides the geometric
primitives used by the model-reduction certificates: support functions,
sampled Hausdorff distances and the inradius within the budget hyperplane.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

_FEAS_TOL = 1e-9


@dataclass(frozen=True)
class BoxSimplexSet:
    """Feasible load profiles: a box, optionally sliced by an energy budget.

    ``energy=None`` drops the budget constraint and leaves a plain box.
    """

    lower: np.ndarray
    upper: np.ndarray
    energy: float | None = None

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("lower and upper must be 1-D vectors of equal length")
        if np.any(lower > upper + _FEAS_TOL):
            raise ValueError("infeasible set: lower > upper")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if self.energy is not None:
            e = float(self.energy)
            scale = max(1.0, float(np.abs(lower).sum() + np.abs(upper).sum()))
            if e < lower.sum() - _FEAS_TOL * scale or e > upper.sum() + _FEAS_TOL * scale:
                raise ValueError("infeasible set: energy outside [sum(lower), sum(upper)]")
            object.__setattr__(self, "energy", e)

    @property
    def dim(self) -> int:
        return self.lower.size

    def contains(self, x, tol: float = 1e-8) -> bool:
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lower - tol) or np.any(x > self.upper + tol):
            return False
        if self.energy is not None and abs(x.sum() - self.energy) > tol * max(1.0, abs(self.energy)):
            return False
        return True


def project_nonneg(v) -> np.ndarray:
    """Componentwise projection onto the nonnegative orthant."""
    return np.maximum(np.asarray(v, dtype=float), 0.0)


def project_box_simplex(s: BoxSimplexSet, v) -> np.ndarray:
    """Exact Euclidean projection of ``v`` onto a box/budget set.

    Runs the sort-based water-filling search for the multiplier ``mu`` such
    that ``clip(v - mu, lower, upper)`` meets the budget; ties are broken
    toward the smallest feasible ``mu``.  Output meets the set constraints
    to about 1e-10.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (s.dim,):
        raise ValueError(f"point has shape {v.shape}, set has dimension {s.dim}")
    e = np.array([np.nan if s.energy is None else s.energy])
    out = project_box_simplex_batch(v[None, :], s.lower[None, :], s.upper[None, :], e)
    return out[0]


def project_box_simplex_batch(V, L, U, E) -> np.ndarray:
    """Row-wise projection of ``V`` onto boxes ``[L, U]`` with budgets ``E``.

    ``E`` entries that are NaN mark rows without a budget constraint (plain
    box clip).  This batched form is the solver's hot path.
    """
    V = np.asarray(V, dtype=float)
    L = np.asarray(L, dtype=float)
    U = np.asarray(U, dtype=float)
    E = np.asarray(E, dtype=float)
    budget = np.isfinite(E)
    if budget.all():
        v, l, u, e = V, L, U, E
        X = None
    else:
        X = np.clip(V, L, U)
        rows = np.where(budget)[0]
        if rows.size == 0:
            return X
        v, l, u, e = V[rows], L[rows], U[rows], E[rows]
    n_t = v.shape[1]
    # Sweep the 2T multiplier values where clip(v - mu) changes slope.  A
    # "p" event (mu = v_t - u_t) frees coordinate t from its upper bound, a
    # "q" event (mu = v_t - l_t) pins it at its lower bound.  The clipped
    # sum g(mu) starts at sum(u), is piecewise linear with slope equal to
    # minus the running free count, and is recovered at every candidate by
    # integrating that slope between consecutive candidates.
    n_rows = v.shape[0]
    cand = np.concatenate([v - u, v - l], axis=1)
    order = np.argsort(cand, axis=1)
    flat = order + (np.arange(n_rows) * 2 * n_t)[:, None]
    cs = cand.take(flat)
    # running free count: +1 per p event, -1 per q event
    free_count = 2.0 * np.cumsum(order < n_t, axis=1) - np.arange(1, 2 * n_t + 1)
    seg = free_count[:, :-1] * np.diff(cs, axis=1)
    g = np.empty_like(cs)
    g[:, 0] = u.sum(axis=1)
    g[:, 1:] = g[:, :1] - np.cumsum(seg, axis=1)
    # g is continuous and nonincreasing in mu; find the last candidate with
    # g >= budget, then solve on the linear segment with that free count.
    ge = g >= e[:, None]
    j = ge.shape[1] - 1 - np.argmax(ge[:, ::-1], axis=1)
    ridx = np.arange(n_rows)
    gj, cj, free = g[ridx, j], cs[ridx, j], free_count[ridx, j]
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = np.where(free > 0, cj + (gj - e) / np.maximum(free, 1), cj)
    x = np.clip(v - mu[:, None], l, u)

    # A correction sweep on the free coordinates absorbs interpolation
    # round-off so the budget holds to ~1e-12 of its scale.
    resid = e - x.sum(axis=1)
    scale = np.maximum(1.0, np.abs(e))
    if np.any(np.abs(resid) > 1e-13 * scale):
        is_free = (x > l + 1e-12) & (x < u - 1e-12)
        n_free = is_free.sum(axis=1)
        adj = np.where(n_free > 0, resid / np.maximum(n_free, 1), 0.0)
        x = np.clip(x + is_free * adj[:, None], l, u)
    if X is None:
        return x
    X[rows] = x
    return X


def project_row(v: np.ndarray, lower: np.ndarray, upper: np.ndarray,
                energy: float) -> np.ndarray:
    """Single-profile water-filling projection with minimal overhead; the
    per-population solver sweep calls this once per population."""
    n_t = v.size
    cand = np.concatenate([v - upper, v - lower])
    order = np.argsort(cand)
    cs = cand[order]
    free_count = 2.0 * np.cumsum(order < n_t) - np.arange(1, 2 * n_t + 1)
    g = np.empty_like(cs)
    g[0] = upper.sum()
    g[1:] = g[0] - np.cumsum(free_count[:-1] * np.diff(cs))
    ge = np.flatnonzero(g >= energy)
    j = int(ge[-1])
    free = free_count[j]
    mu = cs[j] + (g[j] - energy) / free if free > 0 else cs[j]
    x = np.clip(v - mu, lower, upper)
    resid = energy - x.sum()
    if abs(resid) > 1e-13 * max(1.0, abs(energy)):
        is_free = (x > lower + 1e-12) & (x < upper - 1e-12)
        n_free = int(is_free.sum())
        if n_free:
            x = np.clip(x + is_free * (resid / n_free), lower, upper)
    return x


def support_function(s: BoxSimplexSet, direction) -> float:
    """Maximum of ``<direction, x>`` over the set, computed exactly.

    For budgeted sets this is a greedy allocation of the budget across
    coordinates in decreasing order of the direction's components.
    """
    d = np.asarray(direction, dtype=float)
    if d.shape != (s.dim,):
        raise ValueError("direction dimension mismatch")
    return float(support_function_batch(s, d[None, :])[0])


def support_function_batch(s: BoxSimplexSet, D) -> np.ndarray:
    """Support function evaluated at every row of ``D``."""
    D = np.asarray(D, dtype=float)
    if s.energy is None:
        return np.sum(np.where(D > 0, D * s.upper, D * s.lower), axis=1)
    caps = s.upper - s.lower
    budget = s.energy - s.lower.sum()
    order = np.argsort(-D, axis=1)
    dsort = np.take_along_axis(D, order, axis=1)
    csort = np.take_along_axis(np.broadcast_to(caps, D.shape), order, axis=1)
    cum = np.cumsum(csort, axis=1)
    alloc = np.clip(budget - (cum - csort), 0.0, csort)
    return D @ s.lower + np.sum(dsort * alloc, axis=1)


def _unit_directions(dim: int, n_dirs: int, seed: int) -> np.ndarray:
    """Deterministic direction sample: the 2*dim axis directions first, then
    seeded Gaussian directions.  Prefixes are nested across n_dirs."""
    axes = np.concatenate([np.eye(dim), -np.eye(dim)], axis=0)
    if n_dirs <= axes.shape[0]:
        return axes[:n_dirs]
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n_dirs - axes.shape[0], dim))
    norms = np.linalg.norm(g, axis=1)
    bad = norms < 1e-12
    if np.any(bad):
        g[bad] = axes[0]
        norms[bad] = 1.0
    return np.concatenate([axes, g / norms[:, None]], axis=0)


def hausdorff_estimate(a: BoxSimplexSet, b: BoxSimplexSet, n_dirs: int = 512, seed: int = 0) -> float:
    """Sampled Hausdorff distance between two convex compact sets.

    Uses the identity d_H(A, B) = sup over unit directions of
    |h_A(d) - h_B(d)|.  A finite sample is a certified lower bound and is
    exact in the limit; the sample is deterministic for a fixed seed and
    nested across increasing ``n_dirs``.
    """
    if n_dirs <= 0:
        raise ValueError("n_dirs must be positive")
    if a.dim != b.dim:
        raise ValueError("sets must share the same dimension")
    D = _unit_directions(a.dim, n_dirs, seed)
    return float(np.max(np.abs(support_function_batch(a, D) - support_function_batch(b, D))))


def inradius(s: BoxSimplexSet) -> float:
    """Largest distance from a point of the set to its relative boundary.

    Within the budget hyperplane the distance to the facet ``x_i = bound``
    scales by sqrt(1 - 1/T') for T' free coordinates, so the value is the
    optimum of the max-min-slack program divided by that factor.  Fixed
    coordinates (lower == upper) are dropped; degenerate sets return 0 with
    a warning.
    """
    free = s.upper - s.lower > 1e-12
    n_free = int(free.sum())
    lo, up = s.lower[free], s.upper[free]
    if s.energy is None:
        if n_free == 0:
            warnings.warn("degenerate set (all coordinates fixed); inradius is 0")
            return 0.0
        return float(np.min((up - lo) / 2.0))
    if n_free <= 1:
        warnings.warn("degenerate budget set (at most one free coordinate); inradius is 0")
        return 0.0
    e_free = s.energy - float(s.lower[~free].sum())
    slack = min(
        float(np.min((up - lo) / 2.0)),
        (e_free - lo.sum()) / n_free,
        (up.sum() - e_free) / n_free,
    )
    slack = max(slack, 0.0)
    return slack / np.sqrt(1.0 - 1.0 / n_free)


def radius_bound(s: BoxSimplexSet) -> float:
    """Upper bound on max ||x||_2 over the set (exact for plain boxes)."""
    m = np.maximum(np.abs(s.lower), np.abs(s.upper))
    box_bound = float(np.sqrt(np.sum(m ** 2)))
    if s.energy is None:
        return box_bound
    if np.all(s.lower >= 0.0):
        # For nonnegative budgeted profiles, sum x_i^2 <= max(u) * sum(x).
        return float(min(box_bound, np.sqrt(np.max(s.upper, initial=0.0) * max(s.energy, 0.0))))
    return box_bound
