"""Electric-vehicle demand-response scenario generator.

Builds the benchmark instance: a population of EV owners scheduling a
night-spanning charge over 24 hourly periods under a convex block-rate
tariff of the aggregate load, a fleet capacity cap per period and a
periodicity bound on the first/last-period swing.  All randomness flows
through one numpy PCG64 generator seeded from the config, with a fixed
per-player draw order, so a seed reproduces the instance bit for bit on
any platform.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, replace
from typing import Optional

import numpy as np

from . import game as gm
from .reduction import max_coupling_margin

DEFAULT_PRICE_PIECES = ((0.0, 1.0, 0.1), (500.0, -49.0, 0.2), (1000.0, -349.0, 0.5))


class ScenarioInfeasibleError(ValueError):
    """The sampled instance admits no coupled-feasible profile."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Knobs of the EV instance; defaults reproduce the benchmark setup.

    ``homogeneous_types`` replaces the fully heterogeneous population with
    that many exactly identical player groups (useful for exactness
    checks).  ``check_feasibility`` runs the coupled-feasibility LP after
    generation and raises instead of returning a silently bad instance.
    """

    n_players: int = 2000
    horizon: int = 24
    seed: int = 1
    energy_range: tuple = (1.0, 30.0)
    omega_range: tuple = (1.0, 10.0)
    duration_min: int = 4
    ramp_limit: float = 50.0
    capacity: float = 1400.0
    price_pieces: tuple = DEFAULT_PRICE_PIECES
    convention: str = gm.AGG_SUM
    homogeneous_types: Optional[int] = None
    check_feasibility: bool = True

    def __post_init__(self):
        if self.n_players < 1 or self.horizon < 1:
            raise ValueError("need at least one player and one period")
        if not self.duration_min <= self.horizon:
            raise ValueError("horizon must cover the minimum charging duration")
        if self.energy_range[0] > self.energy_range[1] or self.omega_range[0] > self.omega_range[1]:
            raise ValueError("empty parameter range")
        if self.homogeneous_types is not None and not 1 <= self.homogeneous_types <= self.n_players:
            raise ValueError("homogeneous_types must lie in [1, n_players]")


def _plug_and_charge(lower: np.ndarray, upper: np.ndarray, energy: float) -> np.ndarray:
    """Greedy preferred profile: start from the mandatory minimums, then
    charge at full power from the earliest periods until the energy demand
    is met, with a partial fill on the boundary period."""
    y = lower.copy()
    remaining = energy - float(lower.sum())
    for t in range(y.size):
        if remaining <= 0:
            break
        add = min(upper[t] - lower[t], remaining)
        y[t] = lower[t] + add
        remaining -= add
    return y


def _sample_player(rng: np.random.Generator, cfg: ScenarioConfig) -> gm.PlayerParams:
    t_hor = cfg.horizon
    energy = float(rng.uniform(*cfg.energy_range))
    duration = int(rng.integers(cfg.duration_min, t_hor + 1))
    start = int(rng.integers(0, t_hor - duration + 1))
    lower = np.zeros(t_hor)
    upper = np.zeros(t_hor)
    window = slice(start, start + duration)
    lower[window] = rng.uniform(0.0, energy / duration, size=duration)
    upper[window] = rng.uniform(energy / duration, energy, size=duration)
    omega = float(rng.uniform(*cfg.omega_range))
    preferred = _plug_and_charge(lower, upper, energy)
    return gm.PlayerParams(omega=omega, preferred=preferred, energy=energy,
                           lower=lower, upper=upper)


def _coupling(cfg: ScenarioConfig) -> gm.CouplingConstraint:
    t_hor = cfg.horizon
    rows = np.zeros((t_hor + 2, t_hor))
    rhs = np.zeros(t_hor + 2)
    # periodicity: |X_T - X_1| <= ramp_limit, as two one-sided rows
    rows[0, -1], rows[0, 0], rhs[0] = 1.0, -1.0, cfg.ramp_limit
    rows[1, 0], rows[1, -1], rhs[1] = 1.0, -1.0, cfg.ramp_limit
    # capacity: X_t <= capacity for every period
    rows[2:] = np.eye(t_hor)
    rhs[2:] = cfg.capacity
    return gm.CouplingConstraint(matrix=rows, rhs=rhs)


def generate(cfg: ScenarioConfig) -> gm.GameSpec:
    """Sample the instance described by ``cfg``, deterministically per seed.

    Per player the draw order is: energy, charging duration, window start,
    lower bounds over the window, upper bounds over the window, utility
    weight.  With ``homogeneous_types`` set, that many players are sampled
    and replicated in contiguous blocks.
    """
    rng = np.random.default_rng(np.random.PCG64(cfg.seed))
    if cfg.homogeneous_types is None:
        players = tuple(_sample_player(rng, cfg) for _ in range(cfg.n_players))
    else:
        k = cfg.homogeneous_types
        types = [_sample_player(rng, cfg) for _ in range(k)]
        base, extra = divmod(cfg.n_players, k)
        players = []
        for j, proto in enumerate(types):
            players.extend([proto] * (base + (1 if j < extra else 0)))
        players = tuple(players)
    game = gm.GameSpec(
        n_players=cfg.n_players,
        horizon=cfg.horizon,
        players=players,
        prices=gm.PriceFunction.from_pieces(cfg.price_pieces),
        coupling=_coupling(cfg),
        convention=cfg.convention,
    )
    if cfg.check_feasibility and max_coupling_margin(game) < -1e-9:
        raise ScenarioInfeasibleError(
            "generated instance admits no profile satisfying the coupling constraints")
    return game


def shrink(cfg: ScenarioConfig, factor: float, scale_prices: bool = False) -> ScenarioConfig:
    """Desk-scale replica: population, capacity and ramp limit scale by
    ``factor``.  With ``scale_prices`` the tariff thresholds scale too and
    the slopes scale inversely, so each player faces the same congestion
    intensity as at full scale (value continuity is preserved)."""
    if not 0 < factor <= 1:
        raise ValueError("factor must lie in (0, 1]")
    n_new = int(round(cfg.n_players * factor))
    if n_new < 1:
        raise ValueError("factor yields an empty population")
    pieces = cfg.price_pieces
    if scale_prices:
        pieces = tuple((s * factor, i, m / factor) for s, i, m in pieces)
    return replace(cfg, n_players=n_new, capacity=cfg.capacity * factor,
                   ramp_limit=cfg.ramp_limit * factor, price_pieces=pieces)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    doc = asdict(cfg)
    doc["energy_range"] = list(cfg.energy_range)
    doc["omega_range"] = list(cfg.omega_range)
    doc["price_pieces"] = [list(p) for p in cfg.price_pieces]
    return doc


def config_from_dict(doc: dict) -> ScenarioConfig:
    kwargs = dict(doc)
    kwargs["energy_range"] = tuple(doc.get("energy_range", (1.0, 30.0)))
    kwargs["omega_range"] = tuple(doc.get("omega_range", (1.0, 10.0)))
    kwargs["price_pieces"] = tuple(tuple(p) for p in doc.get("price_pieces", DEFAULT_PRICE_PIECES))
    return ScenarioConfig(**kwargs)


def save_config(cfg: ScenarioConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))
