"""Atomic aggregative games: data model, costs and subgradient selections.

Every player picks a load profile over a shared horizon of T periods from
a box/budget action set.  Her cost couples a per-period congestion price
of the aggregate load with a quadratic penalty for deviating from a
preferred profile:

    cost(x, agg) = sum_t x_t * price_t(agg_t) + omega * ||x - preferred||^2

The aggregate is either the sum or the average of all profiles, selected
by an explicit convention flag so that no silent factor-of-N creeps into
the error bounds.  Prices are continuous convex piecewise-affine curves
(block-rate tariffs); below zero load they are extended by their first
affine piece so solver iterates that wander slightly outside feasibility
never fault.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .projection import BoxSimplexSet

AGG_SUM = "sum"
AGG_AVERAGE = "average"
_CONVENTIONS = (AGG_SUM, AGG_AVERAGE)

_CONT_TOL = 1e-12


def _vector(x, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class PriceFunction:
    """Continuous, convex, nondecreasing piecewise-affine price curve.

    Piece i applies on [breakpoints[i-1], breakpoints[i]] and evaluates to
    ``intercepts[i] + slopes[i] * load``.  Slopes must be nonnegative and
    nondecreasing, and adjacent pieces must agree at each breakpoint.
    """

    breakpoints: np.ndarray
    intercepts: np.ndarray
    slopes: np.ndarray

    def __post_init__(self):
        bp = _vector(self.breakpoints, "breakpoints") if np.size(self.breakpoints) else np.empty(0)
        ic = _vector(self.intercepts, "intercepts")
        sl = _vector(self.slopes, "slopes")
        if ic.size != sl.size or ic.size != bp.size + 1:
            raise ValueError("need len(intercepts) == len(slopes) == len(breakpoints) + 1")
        if bp.size and np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        if np.any(sl < -0.0):
            raise ValueError("price slopes must be nonnegative")
        if np.any(np.diff(sl) < -1e-15):
            raise ValueError("price slopes must be nondecreasing (convexity)")
        for k, b in enumerate(bp):
            left = ic[k] + sl[k] * b
            right = ic[k + 1] + sl[k + 1] * b
            if abs(left - right) > _CONT_TOL * max(1.0, abs(left), abs(right)):
                raise ValueError(f"price pieces disagree at breakpoint {b}: {left} vs {right}")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "intercepts", ic)
        object.__setattr__(self, "slopes", sl)

    @classmethod
    def from_pieces(cls, pieces: Sequence[Sequence[float]]) -> "PriceFunction":
        """Build from [start, intercept, slope] triples; the first start is
        the beginning of the domain and is otherwise ignored."""
        pieces = sorted((list(map(float, p)) for p in pieces), key=lambda p: p[0])
        if not pieces:
            raise ValueError("need at least one price piece")
        starts = [p[0] for p in pieces]
        return cls(
            breakpoints=np.array(starts[1:], dtype=float),
            intercepts=np.array([p[1] for p in pieces], dtype=float),
            slopes=np.array([p[2] for p in pieces], dtype=float),
        )

    def pieces(self) -> list:
        starts = [0.0] + [float(b) for b in self.breakpoints]
        return [[s, float(i), float(m)] for s, i, m in zip(starts, self.intercepts, self.slopes)]

    def _index(self, load):
        return np.searchsorted(self.breakpoints, load, side="right")

    def value_any(self, load):
        """Price at any real load; below 0 the first piece is extended."""
        load = np.asarray(load, dtype=float)
        idx = self._index(load)
        out = self.intercepts[idx] + self.slopes[idx] * load
        return float(out) if out.ndim == 0 else out

    def value(self, load):
        load = np.asarray(load, dtype=float)
        if np.any(load < 0):
            raise ValueError("price is only defined for nonnegative load")
        return self.value_any(load)

    def slope_right(self, load):
        """One-sided subgradient selection: the slope of the right piece."""
        load = np.asarray(load, dtype=float)
        out = self.slopes[self._index(load)]
        return float(out) if out.ndim == 0 else out


def eval_price(pf: PriceFunction, load):
    """Piecewise-affine block-rate price of a nonnegative aggregate load."""
    return pf.value(load)


def price_subgradient(pf: PriceFunction, load):
    """Subgradient selection of the price; equals the right slope at a
    breakpoint, the unique slope elsewhere."""
    load = np.asarray(load, dtype=float)
    if np.any(load < 0):
        raise ValueError("price is only defined for nonnegative load")
    return pf.slope_right(load)


@dataclass(frozen=True)
class PlayerParams:
    """One player of the congestion family.

    ``energy=None`` drops the budget constraint (plain box action set),
    which the solver and the geometry helpers support for small hand-built
    games.  Weight ``omega`` may be zero, in which case the strong
    monotonicity constant vanishes.
    """

    omega: float
    preferred: np.ndarray
    energy: float | None
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError("omega must be nonnegative")
        y = _vector(self.preferred, "preferred")
        lo = _vector(self.lower, "lower")
        up = _vector(self.upper, "upper")
        if not (y.size == lo.size == up.size):
            raise ValueError("preferred/lower/upper must share one length")
        if np.any(lo < -1e-12):
            raise ValueError("lower power bounds must be nonnegative")
        if np.any(lo > up + 1e-12):
            raise ValueError("need lower <= upper componentwise")
        tol = 1e-8 * max(1.0, float(np.abs(up).sum()))
        if np.any(y < lo - tol) or np.any(y > up + tol):
            raise ValueError("preferred profile violates the power bounds")
        if self.energy is not None:
            e = float(self.energy)
            if e < lo.sum() - tol or e > up.sum() + tol:
                raise ValueError("energy outside [sum(lower), sum(upper)]")
            if abs(y.sum() - e) > tol:
                raise ValueError("preferred profile does not meet the energy budget")
            object.__setattr__(self, "energy", e)
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "preferred", y)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    @property
    def horizon(self) -> int:
        return self.preferred.size


def action_set(p: PlayerParams) -> BoxSimplexSet:
    return BoxSimplexSet(p.lower, p.upper, p.energy)


@dataclass(frozen=True)
class CouplingConstraint:
    """Affine restriction ``matrix @ agg <= rhs`` on the aggregate profile
    (in the game's own aggregation convention)."""

    matrix: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        b = _vector(self.rhs, "rhs")
        if a.shape[0] != b.size:
            raise ValueError("coupling matrix rows must match rhs length")
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "rhs", b)

    @property
    def n_rows(self) -> int:
        return self.rhs.size


class GenericCost:
    """Extensibility hook: a user-supplied player cost.

    ``value(x, agg)`` evaluates the cost, ``own_subgradient(x, agg)`` one
    selection of its subdifferential in the own action, and (optionally,
    needed for the self-impact term) ``agg_subgradient(x, agg)`` one
    selection in the aggregate argument.
    """

    def __init__(self, value: Callable, own_subgradient: Callable,
                 agg_subgradient: Optional[Callable] = None):
        self.value = value
        self.own_subgradient = own_subgradient
        self.agg_subgradient = agg_subgradient


@dataclass(frozen=True)
class GameSpec:
    """Immutable description of an atomic aggregative game.

    ``prices`` holds one price curve per period (a single curve is
    replicated across the horizon).  ``convention`` chooses whether the
    second cost argument is the sum or the average of all profiles.
    ``custom_costs`` optionally replaces the congestion-form cost of every
    player; it is not serialized.
    """

    n_players: int
    horizon: int
    players: tuple
    prices: tuple
    coupling: Optional[CouplingConstraint] = None
    convention: str = AGG_SUM
    custom_costs: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.n_players < 1 or self.horizon < 1:
            raise ValueError("need at least one player and one period")
        players = tuple(self.players)
        if len(players) != self.n_players:
            raise ValueError("players list length must equal n_players")
        for p in players:
            if p.horizon != self.horizon:
                raise ValueError("player horizon mismatch")
        prices = self.prices
        if isinstance(prices, PriceFunction):
            prices = (prices,) * self.horizon
        else:
            prices = tuple(prices)
            if len(prices) == 1:
                prices = prices * self.horizon
        if len(prices) != self.horizon:
            raise ValueError("need one price function per period")
        if self.convention not in _CONVENTIONS:
            raise ValueError(f"convention must be one of {_CONVENTIONS}")
        if self.coupling is not None and self.coupling.matrix.shape[1] != self.horizon:
            raise ValueError("coupling matrix columns must equal the horizon")
        if self.custom_costs is not None:
            cc = tuple(self.custom_costs)
            if len(cc) != self.n_players:
                raise ValueError("need one custom cost per player")
            object.__setattr__(self, "custom_costs", cc)
        object.__setattr__(self, "players", players)
        object.__setattr__(self, "prices", prices)

    @property
    def shared_price(self) -> bool:
        return all(p is self.prices[0] for p in self.prices)


@dataclass(frozen=True)
class MonotonicityReport:
    is_monotone: bool
    alpha: Optional[float]
    beta: Optional[float]


def aggregate_profile(game: GameSpec, profile, weights=None) -> np.ndarray:
    """Aggregate of a (rows x T) profile in the game's convention; row
    weights are population sizes (all 1 for the ungrouped game)."""
    profile = np.atleast_2d(np.asarray(profile, dtype=float))
    if weights is None:
        agg = profile.sum(axis=0)
        total = profile.shape[0]
    else:
        w = np.asarray(weights, dtype=float)
        agg = w @ profile
        total = w.sum()
    if game.convention == AGG_AVERAGE:
        agg = agg / total
    return agg


def price_values(game: GameSpec, agg) -> np.ndarray:
    """Per-period price of the aggregate, extended below zero load."""
    agg = np.asarray(agg, dtype=float)
    if game.shared_price:
        return np.asarray(game.prices[0].value_any(agg))
    return np.array([pf.value_any(a) for pf, a in zip(game.prices, agg)])


def price_slopes(game: GameSpec, agg) -> np.ndarray:
    agg = np.asarray(agg, dtype=float)
    if game.shared_price:
        return np.asarray(game.prices[0].slope_right(agg))
    return np.array([pf.slope_right(a) for pf, a in zip(game.prices, agg)])


def eval_cost(game: GameSpec, n: int, x_n, agg) -> float:
    """Cost of player ``n`` at own profile ``x_n`` and aggregate ``agg``."""
    x_n = np.asarray(x_n, dtype=float)
    agg = np.asarray(agg, dtype=float)
    if x_n.shape != (game.horizon,) or agg.shape != (game.horizon,):
        raise ValueError("profile/aggregate dimension mismatch")
    if game.custom_costs is not None:
        return float(game.custom_costs[n].value(x_n, agg))
    p = game.players[n]
    dev = x_n - p.preferred
    return float(x_n @ price_values(game, agg) + p.omega * dev @ dev)


def own_cost_subgradient(game: GameSpec, profile, agg) -> np.ndarray:
    """One selection of the per-player subgradient in the own action, with
    the aggregate held fixed at ``agg``.  Rows follow the profile."""
    profile = np.atleast_2d(np.asarray(profile, dtype=float))
    if game.custom_costs is not None:
        return np.vstack([
            np.asarray(c.own_subgradient(profile[n], agg), dtype=float)
            for n, c in enumerate(game.custom_costs)
        ])
    pv = price_values(game, agg)
    omegas = np.array([p.omega for p in game.players])
    preferred = np.vstack([p.preferred for p in game.players])
    return pv[None, :] + 2.0 * omegas[:, None] * (profile - preferred)


def self_impact_scale(game: GameSpec) -> float:
    """d agg / d x_n: 1 under the sum convention, 1/N under the average."""
    return 1.0 if game.convention == AGG_SUM else 1.0 / game.n_players


def svwe_subgradient(game: GameSpec, profile) -> np.ndarray:
    """Subgradient selection of the population (Wardrop) operator: each
    player price-takes, the aggregate is treated as fixed."""
    profile = np.atleast_2d(np.asarray(profile, dtype=float))
    agg = aggregate_profile(game, profile)
    return own_cost_subgradient(game, profile, agg)


def vne_subgradient(game: GameSpec, profile) -> np.ndarray:
    """Subgradient selection of the atomic (Nash) operator: the Wardrop
    term plus each player's self-impact on the aggregate price."""
    profile = np.atleast_2d(np.asarray(profile, dtype=float))
    agg = aggregate_profile(game, profile)
    g = own_cost_subgradient(game, profile, agg)
    scale = self_impact_scale(game)
    if game.custom_costs is not None:
        for n, c in enumerate(game.custom_costs):
            if c.agg_subgradient is None:
                raise ValueError("custom cost lacks an aggregate subgradient")
            g[n] += scale * np.asarray(c.agg_subgradient(profile[n], agg), dtype=float)
        return g
    return g + scale * profile * price_slopes(game, agg)[None, :]


def modified_cost(game: GameSpec, profile, n: int, x_n) -> float:
    """Cost of player n when she deviates to ``x_n`` and the aggregate is
    recomputed accordingly (the unilateral-deviation cost)."""
    profile = np.atleast_2d(np.asarray(profile, dtype=float))
    x_n = np.asarray(x_n, dtype=float)
    agg = aggregate_profile(game, profile) + self_impact_scale(game) * (x_n - profile[n])
    return eval_cost(game, n, x_n, agg)


def classify_monotonicity(game: GameSpec) -> MonotonicityReport:
    """Monotonicity class of the population operator for the congestion
    family: convex nondecreasing prices with concave utilities give a
    monotone operator; strictly positive weights give the strong constant
    ``alpha = 2 * min omega`` and strictly increasing prices the aggregate
    constant ``beta = min slope``."""
    if game.custom_costs is not None:
        raise ValueError("monotonicity classification needs the congestion family")
    omegas = np.array([p.omega for p in game.players])
    slopes = np.concatenate([pf.slopes for pf in game.prices])
    alpha = 2.0 * float(omegas.min()) if np.all(omegas > 0) else None
    beta = float(slopes.min()) if np.all(slopes > 0) else None
    return MonotonicityReport(is_monotone=True, alpha=alpha, beta=beta)


# ---------------------------------------------------------------------------
# JSON serialization.  Schema: players as arrays, price pieces as
# [start, intercept, slope] triples per period, coupling as dense matrix+rhs.
# ---------------------------------------------------------------------------

def game_to_dict(game: GameSpec) -> dict:
    if game.custom_costs is not None:
        raise ValueError("custom-cost games are not serializable")
    return {
        "n_players": game.n_players,
        "horizon": game.horizon,
        "convention": game.convention,
        "players": [
            {
                "omega": p.omega,
                "preferred": p.preferred.tolist(),
                "energy": p.energy,
                "lower": p.lower.tolist(),
                "upper": p.upper.tolist(),
            }
            for p in game.players
        ],
        "prices": [pf.pieces() for pf in game.prices],
        "coupling": None if game.coupling is None else {
            "matrix": game.coupling.matrix.tolist(),
            "rhs": game.coupling.rhs.tolist(),
        },
    }


def game_from_dict(doc: dict) -> GameSpec:
    players = tuple(
        PlayerParams(
            omega=d["omega"],
            preferred=np.array(d["preferred"], dtype=float),
            energy=d["energy"],
            lower=np.array(d["lower"], dtype=float),
            upper=np.array(d["upper"], dtype=float),
        )
        for d in doc["players"]
    )
    raw_prices = doc["prices"]
    if raw_prices and isinstance(raw_prices[0][0], (int, float)):
        raw_prices = [raw_prices]
    if all(p == raw_prices[0] for p in raw_prices):
        shared = PriceFunction.from_pieces(raw_prices[0])
        prices = (shared,) * int(doc["horizon"])
    else:
        prices = tuple(PriceFunction.from_pieces(p) for p in raw_prices)
    coupling = None
    if doc.get("coupling"):
        coupling = CouplingConstraint(
            matrix=np.array(doc["coupling"]["matrix"], dtype=float),
            rhs=np.array(doc["coupling"]["rhs"], dtype=float),
        )
    return GameSpec(
        n_players=int(doc["n_players"]),
        horizon=int(doc["horizon"]),
        players=players,
        prices=prices,
        coupling=coupling,
        convention=doc.get("convention", AGG_SUM),
    )


def save_game(game: GameSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(game_to_dict(game), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_game(path) -> GameSpec:
    with open(path) as fh:
        return game_from_dict(json.load(fh))
