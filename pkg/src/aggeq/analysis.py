"""A-priori error certificates and empirical error metrics.

Certificate values are straight evaluations of the theoretical bounds in
the average-aggregate normalization; they never clamp to measured values.
A certificate is only marked valid when every constant it needs is present
and positive, and invalid certificates carry an infinite value so they can
never be mistaken for a guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class BoundCertificate:
    kind: str
    value: float
    inputs: dict = field(default_factory=dict)
    validity: bool = True

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": float(self.value),
                "inputs": {k: (None if v is None else v) for k, v in self.inputs.items()},
                "validity": bool(self.validity)}


def _cert(kind: str, value: Optional[float], inputs: dict) -> BoundCertificate:
    ok = value is not None and np.isfinite(value) and value >= 0
    return BoundCertificate(kind=kind, value=float(value) if ok else float("inf"),
                            inputs=inputs, validity=bool(ok))


def vne_svwe_bounds(agg_lipschitz: float, n_players: int,
                    alpha: Optional[float] = None, beta: Optional[float] = None,
                    radius: Optional[float] = None) -> list:
    """Distance bounds between the atomic equilibrium and the population
    equilibrium of the same game, shrinking with the number of players.

    Strong case (``alpha``): individual L2/(alpha sqrt(N)), mean and
    aggregate L2/(alpha N).  Aggregatively strong case (``beta``, needs
    ``radius``): aggregate sqrt(2 R L2 / (beta N)).
    """
    if n_players < 1:
        raise ValueError("need at least one player")
    if agg_lipschitz <= 0:
        raise ValueError("aggregate Lipschitz constant must be positive")
    inputs = {"L2": agg_lipschitz, "alpha": alpha, "beta": beta,
              "N": n_players, "R": radius}
    out = []
    strong = alpha if (alpha is not None and alpha > 0) else None
    out.append(_cert("vne_svwe_individual",
                     None if strong is None else agg_lipschitz / (strong * np.sqrt(n_players)),
                     inputs))
    mean_val = None if strong is None else agg_lipschitz / (strong * n_players)
    out.append(_cert("vne_svwe_mean", mean_val, inputs))
    out.append(_cert("vne_svwe_aggregate", mean_val, inputs))
    aggr = None
    if beta is not None and beta > 0 and radius is not None and radius > 0:
        aggr = np.sqrt(2.0 * radius * agg_lipschitz / (beta * n_players))
    out.append(_cert("vne_svwe_aggregate_aggr", aggr, inputs))
    return out


def reduction_bounds(error_const: float, n_players: int,
                     alpha: Optional[float] = None,
                     beta: Optional[float] = None) -> list:
    """Distance bounds between the reduced-game equilibrium (lifted back to
    the members) and the full population equilibrium.

    Strong case: individual sqrt(N K / alpha) (grows with N since member
    errors accumulate in the norm), mean and aggregate sqrt(K / alpha).
    Aggregatively strong case: aggregate sqrt(K / beta).
    """
    if n_players < 1:
        raise ValueError("need at least one player")
    if error_const < 0:
        raise ValueError("error constant must be nonnegative")
    inputs = {"K": error_const, "alpha": alpha, "beta": beta, "N": n_players}
    out = []
    strong = alpha if (alpha is not None and alpha > 0) else None
    out.append(_cert("reduction_individual",
                     None if strong is None else np.sqrt(n_players * error_const / strong),
                     inputs))
    out.append(_cert("reduction_aggregate_strong",
                     None if strong is None else np.sqrt(error_const / strong),
                     inputs))
    out.append(_cert("reduction_aggregate_aggr",
                     None if (beta is None or beta <= 0) else np.sqrt(error_const / beta),
                     inputs))
    return out


def combined_bounds(agg_lipschitz: float, n_players: int, error_const: float,
                    alpha: Optional[float] = None, beta: Optional[float] = None,
                    radius: Optional[float] = None, horizon: Optional[int] = None,
                    agg_curvature: Optional[float] = None) -> list:
    """End-to-end aggregate bounds: reduced-game equilibrium vs the atomic
    equilibria of the original game (triangle combination of the two
    previous families).

    The aggregatively strong display takes an explicit curvature constant
    ``agg_curvature`` together with the horizon; when it is not supplied
    the first term falls back to the two-step combination
    sqrt(2 R L2/(beta N)), and the certificate records that choice.
    """
    if error_const < 0:
        raise ValueError("error constant must be nonnegative")
    inputs = {"L2": agg_lipschitz, "alpha": alpha, "beta": beta, "N": n_players,
              "K": error_const, "R": radius, "T": horizon, "C": agg_curvature}
    out = []
    strong = None
    if alpha is not None and alpha > 0 and agg_lipschitz > 0:
        strong = agg_lipschitz / (alpha * n_players) + np.sqrt(error_const / alpha)
    out.append(_cert("combined_aggregate", strong, inputs))
    aggr = None
    if beta is not None and beta > 0 and radius is not None and radius > 0:
        if agg_curvature is not None and horizon is not None:
            first = radius * np.sqrt(2.0 * horizon * agg_curvature / (n_players * beta))
        else:
            first = np.sqrt(2.0 * radius * agg_lipschitz / (beta * n_players))
            inputs = dict(inputs, first_term="two-step fallback (no curvature constant)")
        aggr = first + np.sqrt(error_const / beta)
    out.append(_cert("combined_aggregate_aggr", aggr, inputs))
    return out


def similarity_bound(alpha_n: float, own_lip_a: float, own_lip_b: float,
                     set_distance: float, grad_distance: float,
                     radius: float) -> float:
    """Bound on the action distance of two similar players at an uncoupled
    population equilibrium: sqrt(((La+Lb) d_set + 2 d_grad R) / alpha)."""
    if alpha_n <= 0:
        raise ValueError("needs a positive strong convexity constant")
    val = ((own_lip_a + own_lip_b) * set_distance + 2.0 * grad_distance * radius) / alpha_n
    return float(np.sqrt(max(val, 0.0)))


def relative_aggregate_error(ref, approx) -> float:
    """Euclidean relative error ||agg_approx - agg_ref|| / ||agg_ref||."""
    a_ref = np.asarray(ref.aggregate, dtype=float)
    a_app = np.asarray(approx.aggregate, dtype=float)
    if a_ref.shape != a_app.shape:
        raise ValueError("aggregates have mismatched horizons")
    norm = float(np.linalg.norm(a_ref))
    if norm == 0.0:
        raise ValueError("reference aggregate has zero norm")
    return float(np.linalg.norm(a_app - a_ref) / norm)


def fit_rate(xs, ys):
    """Log-log least-squares decay exponent: fits y ~ x^(-a).

    Returns ``(a, r2)`` with ``a`` the negated slope of log y on log x.
    A constant y gives a = 0 with a perfect fit.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.size != ys.size or xs.size < 3:
        raise ValueError("need at least 3 paired samples")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise ValueError("log-log fit needs positive samples")
    lx, ly = np.log(xs), np.log(ys)
    if np.ptp(lx) < 1e-12:
        raise ValueError("degenerate x sample")
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    if ss_tot < 1e-24:
        r2 = 1.0 if ss_res < 1e-24 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return float(-slope), float(r2)
