"""Projected subgradient solver for the equilibrium variational inequalities.

Both equilibrium notions are characterized as generalized variational
inequalities: find a feasible profile and a subgradient selection g with
<g, z - x> >= 0 for every feasible z.  The solver relaxes the aggregate
coupling constraint with Lagrange multipliers and alternates

    x_i  <- P_X_i( x_i - tau_k (g_i + A^T lam) )
    lam  <- ( lam - tau_k (b - 2 A agg_new + A agg_old) )^+

with a diminishing step tau_k = c/k by default, stopping when the joint
iterate displacement drops below ``stop_tol``.  Convergence of this scheme
is an empirical matter, not a theorem; non-convergence is reported through
``converged=False`` rather than an exception.

The per-population sweep is bulk-synchronous: populations update
independently between two aggregate synchronization points, so the sweep
may run batched, one population at a time, or on parallel workers without
changing the iterates.  Solves share no mutable state with each other.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import game as gm
from .projection import project_box_simplex_batch, project_row

STEP_HARMONIC = "harmonic"
STEP_CONSTANT = "constant"


@dataclass
class SolverConfig:
    """Iteration controls.

    ``step_rule`` is "harmonic" (tau_k = step_param / k) or "constant"
    (tau_k = step_param).  ``initial_profile`` overrides the default start
    at the projected preferred profiles.  ``population_loop`` executes the
    per-population subgradient/projection sweep one population at a time
    (the bulk-synchronous reference schedule, whose per-iteration cost
    grows with the number of populations); the default sweeps all
    populations in one vectorized batch.  Both schedules produce the same
    iterates.
    """

    step_rule: str = STEP_HARMONIC
    step_param: float = 1.0
    stop_tol: float = 1e-3
    max_iters: int = 200_000
    dual_init: Optional[np.ndarray] = None
    record_trace: bool = False
    initial_profile: Optional[np.ndarray] = None
    population_loop: bool = False

    def __post_init__(self):
        if self.step_rule not in (STEP_HARMONIC, STEP_CONSTANT):
            raise ValueError("unknown step rule")
        if self.stop_tol <= 0 or self.max_iters < 1 or self.step_param <= 0:
            raise ValueError("need stop_tol > 0, step_param > 0, max_iters >= 1")

    def step(self, k: int) -> float:
        return self.step_param / k if self.step_rule == STEP_HARMONIC else self.step_param


@dataclass
class EquilibriumResult:
    """Outcome of one solve.

    ``residual`` is the final joint iterate displacement (the stopping
    metric); a probe-based equilibrium gap is computed separately by
    ``gvi_residual``.  ``trace`` rows are
    (iteration, iterate_distance, coupling_violation, wall_time_s).
    """

    profile: np.ndarray
    aggregate: np.ndarray
    duals: np.ndarray
    iterations: int
    wall_time_s: float
    residual: float
    converged: bool
    mode: str
    weights: np.ndarray
    trace: Optional[list] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "profile": self.profile.tolist(),
            "aggregate": self.aggregate.tolist(),
            "duals": self.duals.tolist(),
            "iterations": self.iterations,
            "wall_time_s": self.wall_time_s,
            "residual": self.residual,
            "converged": self.converged,
            "mode": self.mode,
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EquilibriumResult":
        return cls(
            profile=np.array(doc["profile"], dtype=float),
            aggregate=np.array(doc["aggregate"], dtype=float),
            duals=np.array(doc["duals"], dtype=float),
            iterations=int(doc["iterations"]),
            wall_time_s=float(doc["wall_time_s"]),
            residual=float(doc["residual"]),
            converged=bool(doc["converged"]),
            mode=doc["mode"],
            weights=np.array(doc["weights"], dtype=float),
        )


def _stacked_sets(game: gm.GameSpec):
    lo = np.vstack([p.lower for p in game.players])
    up = np.vstack([p.upper for p in game.players])
    eb = np.array([np.nan if p.energy is None else p.energy for p in game.players])
    return lo, up, eb


def _solve(game: gm.GameSpec, weights, cfg: SolverConfig, mode: str) -> EquilibriumResult:
    n = len(game.players)
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w <= 0):
        raise ValueError("weights must be positive, one per (grouped) player")
    lo, up, eb = _stacked_sets(game)
    preferred = np.vstack([p.preferred for p in game.players])
    omegas = np.array([p.omega for p in game.players])

    x = cfg.initial_profile if cfg.initial_profile is not None else preferred
    x = project_box_simplex_batch(np.asarray(x, dtype=float), lo, up, eb)

    coupling = game.coupling
    if coupling is not None:
        a_mat, b_vec = coupling.matrix, coupling.rhs
        lam = np.zeros(coupling.n_rows) if cfg.dual_init is None else np.asarray(cfg.dual_init, dtype=float).copy()
        if lam.shape != (coupling.n_rows,) or np.any(lam < 0):
            raise ValueError("dual_init must be nonnegative with one entry per coupling row")
    else:
        a_mat, b_vec = None, None
        lam = np.zeros(0) if cfg.dual_init is None else np.asarray(cfg.dual_init, dtype=float).copy()

    total_w = w.sum()
    avg = game.convention == gm.AGG_AVERAGE
    impact = gm.self_impact_scale(game) if mode == "vne" else 0.0
    custom = game.custom_costs is not None

    trace = [] if cfg.record_trace else None
    start = time.perf_counter()
    converged = False
    delta = float("inf")
    agg = w @ x / (total_w if avg else 1.0)
    iters = 0

    for k in range(1, cfg.max_iters + 1):
        tau = cfg.step(k)
        if custom:
            g = gm.own_cost_subgradient(game, x, agg)
            if mode == "vne":
                for i, c in enumerate(game.custom_costs):
                    if c.agg_subgradient is None:
                        raise ValueError("custom cost lacks an aggregate subgradient")
                    g[i] += impact * np.asarray(c.agg_subgradient(x[i], agg), dtype=float)
        else:
            pv = gm.price_values(game, agg)
            g = pv[None, :] + 2.0 * omegas[:, None] * (x - preferred)
            if mode == "vne":
                g += impact * x * gm.price_slopes(game, agg)[None, :]
        if a_mat is not None:
            g = g + (a_mat.T @ lam)[None, :]
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite cost subgradient encountered")

        if cfg.population_loop:
            x_new = np.empty_like(x)
            for i in range(n):
                target = x[i] - tau * g[i]
                if np.isfinite(eb[i]):
                    x_new[i] = project_row(target, lo[i], up[i], eb[i])
                else:
                    x_new[i] = np.clip(target, lo[i], up[i])
        else:
            x_new = project_box_simplex_batch(x - tau * g, lo, up, eb)
        agg_new = w @ x_new / (total_w if avg else 1.0)
        if a_mat is not None:
            lam_new = np.maximum(0.0, lam - tau * (b_vec - 2.0 * a_mat @ agg_new + a_mat @ agg))
            viol = float(np.max(a_mat @ agg_new - b_vec))
            dual_sq = float(np.sum((lam_new - lam) ** 2))
        else:
            lam_new = lam
            viol = 0.0
            dual_sq = 0.0

        delta = float(np.sqrt(np.sum((x_new - x) ** 2) + dual_sq))
        x, lam, agg = x_new, lam_new, agg_new
        iters = k
        if trace is not None:
            trace.append((k, delta, viol, time.perf_counter() - start))
        if delta <= cfg.stop_tol:
            converged = True
            break

    return EquilibriumResult(
        profile=x,
        aggregate=agg,
        duals=lam,
        iterations=iters,
        wall_time_s=time.perf_counter() - start,
        residual=delta,
        converged=converged,
        mode=mode,
        weights=w,
        trace=trace,
    )


def solve_svwe(game: gm.GameSpec, weights=None, cfg: Optional[SolverConfig] = None) -> EquilibriumResult:
    """Symmetric Wardrop equilibrium of the (possibly grouped) population
    game; ``weights`` are the population sizes, all 1 when ungrouped."""
    return _solve(game, weights, cfg or SolverConfig(), "svwe")


def solve_vne(game: gm.GameSpec, cfg: Optional[SolverConfig] = None) -> EquilibriumResult:
    """Variational Nash equilibrium of the ungrouped atomic game."""
    return _solve(game, None, cfg or SolverConfig(), "vne")


def coupling_violation(game: gm.GameSpec, result: EquilibriumResult) -> float:
    """max(A @ agg - b) at the result's aggregate; -inf with no coupling."""
    if game.coupling is None:
        return float("-inf")
    return float(np.max(game.coupling.matrix @ result.aggregate - game.coupling.rhs))


def gvi_residual(game: gm.GameSpec, result: EquilibriumResult, n_probe: int = 64, seed: int = 0) -> float:
    """Probe-based equilibrium gap: max over random feasible profiles z of
    <g(x), x - z> with the population weights in the pairing.

    Probes are built by projecting box-uniform points onto each action set
    and, when a coupling constraint is present, shrinking toward the
    candidate profile until the aggregate is feasible.  A value below
    tolerance certifies the variational inequality on the probe set.
    """
    if n_probe <= 0:
        raise ValueError("n_probe must be positive")
    x = np.atleast_2d(result.profile)
    w = result.weights
    agg = gm.aggregate_profile(game, x, w)
    if result.mode == "vne":
        g = gm.own_cost_subgradient(game, x, agg)
        scale = gm.self_impact_scale(game)
        if game.custom_costs is not None:
            for i, c in enumerate(game.custom_costs):
                g[i] += scale * np.asarray(c.agg_subgradient(x[i], agg), dtype=float)
        else:
            g = g + scale * x * gm.price_slopes(game, agg)[None, :]
    else:
        g = gm.own_cost_subgradient(game, x, agg)

    lo, up, eb = _stacked_sets(game)
    span = np.where(up > lo, up - lo, 1.0)
    rng = np.random.default_rng(seed)
    best = -np.inf
    for _ in range(n_probe):
        raw = rng.uniform(lo - 0.1 * span, up + 0.1 * span)
        z = project_box_simplex_batch(raw, lo, up, eb)
        if game.coupling is not None:
            a_mat, b_vec = game.coupling.matrix, game.coupling.rhs
            p = a_mat @ agg - b_vec
            q = a_mat @ gm.aggregate_profile(game, z, w) - b_vec
            t = 1.0
            over = q > 0
            if np.any(over):
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratios = np.where(q > p, (0.0 - p) / (q - p), 1.0)
                t = float(np.clip(np.min(ratios[over]), 0.0, 1.0))
            z = x + t * (z - x)
        gap = float(np.sum(w[:, None] * g * (x - z)))
        best = max(best, gap)
    return best
