"""Model reduction: cluster similar players and build a small auxiliary game.

Players are clustered by k-means on their parameter vectors
[omega, preferred, energy, lower, upper]; each cluster becomes one
population whose parameters are the within-cluster means.  Two indicators
quantify how faithful the grouping is: the worst member-to-population
Hausdorff distance between action sets (``set_gap``) and the worst
member-to-population distance between own-cost subgradients (``grad_gap``,
closed form for quadratic utilities).  They combine with Lipschitz and
interior-margin constants into the reduction error constant

    error_const = 2 * radius * (3 * own_lipschitz * set_gap / margin + grad_gap)

which feeds every a-priori certificate on the distance between the reduced
equilibrium and the full one.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from . import game as gm
from .projection import (BoxSimplexSet, hausdorff_estimate, inradius,
                         project_box_simplex, radius_bound, support_function_batch)


@dataclass(frozen=True)
class ClusterAssignment:
    """Partition of the players into clusters plus the cluster means."""

    n_clusters: int
    labels: np.ndarray
    sizes: np.ndarray
    centroids: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        sizes = np.asarray(self.sizes, dtype=int)
        if sizes.size != self.n_clusters or sizes.sum() != labels.size:
            raise ValueError("cluster sizes inconsistent with labels")
        if np.any(sizes <= 0):
            raise ValueError("every cluster must be nonempty")
        if labels.min() < 0 or labels.max() >= self.n_clusters:
            raise ValueError("labels out of range")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "centroids", np.asarray(self.centroids, dtype=float))


def player_vector(p: gm.PlayerParams) -> np.ndarray:
    """Parameter vector [omega, preferred, energy, lower, upper] in R^(3T+2)."""
    if p.energy is None:
        raise ValueError("clustering requires budgeted players")
    return np.concatenate([[p.omega], p.preferred, [p.energy], p.lower, p.upper])


def unpack_player_vector(vec, horizon: int):
    """Inverse of ``player_vector``: (omega, preferred, energy, lower, upper)."""
    vec = np.asarray(vec, dtype=float)
    if vec.size != 3 * horizon + 2:
        raise ValueError("parameter vector has wrong length")
    t = horizon
    return (
        float(vec[0]),
        vec[1:1 + t].copy(),
        float(vec[1 + t]),
        vec[2 + t:2 + 2 * t].copy(),
        vec[2 + 2 * t:].copy(),
    )


def _cluster_mean(rows: np.ndarray) -> np.ndarray:
    # Exactness snap: a cluster of identical vectors gets the common vector
    # bitwise, so exactly homogeneous groups report zero heterogeneity.
    if np.all(rows == rows[0]):
        return rows[0].copy()
    return rows.mean(axis=0)


def kmeans_objective(vectors, labels) -> float:
    """Within-cluster sum of squared distances to the cluster means."""
    vectors = np.asarray(vectors, dtype=float)
    labels = np.asarray(labels, dtype=int)
    total = 0.0
    for j in np.unique(labels):
        rows = vectors[labels == j]
        total += float(np.sum((rows - rows.mean(axis=0)) ** 2))
    return total


def _farthest_point_init(vectors: np.ndarray, k: int, rng) -> np.ndarray:
    n = vectors.shape[0]
    first = int(rng.integers(n))
    chosen = [first]
    dist = np.sum((vectors - vectors[first]) ** 2, axis=1)
    for _ in range(1, k):
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.sum((vectors - vectors[nxt]) ** 2, axis=1))
    return vectors[chosen].copy()


def kmeans(vectors, k: int, seed: int = 0, max_rounds: int = 100,
           standardize: bool = False) -> ClusterAssignment:
    """Lloyd iteration with farthest-point seeding, deterministic per seed.

    Empty clusters are repaired by reseeding at the point farthest from all
    current centers.  ``standardize`` switches on per-feature scaling for
    experimentation; the default clusters the raw parameter vectors.
    """
    vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
    n = vectors.shape[0]
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= number of points")
    work = vectors
    if standardize:
        std = vectors.std(axis=0)
        work = (vectors - vectors.mean(axis=0)) / np.where(std > 1e-12, std, 1.0)

    rng = np.random.default_rng(seed)
    centers = _farthest_point_init(work, k, rng)
    labels = np.full(n, -1, dtype=int)
    for _ in range(max_rounds):
        d2 = np.sum((work[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(d2, axis=1)
        for j in range(k):
            if not np.any(new_labels == j):
                far = int(np.argmax(np.min(d2, axis=1)))
                new_labels[far] = j
                d2[far] = 0.0
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centers = np.vstack([_cluster_mean(work[labels == j]) for j in range(k)])

    # Duplicated points can starve a cluster for good (k exceeds the number
    # of distinct points); hand it one member of the largest cluster.
    sizes = np.bincount(labels, minlength=k)
    while np.any(sizes == 0):
        empty = int(np.argmin(sizes))
        donor = int(np.argmax(sizes))
        labels[int(np.where(labels == donor)[0][0])] = empty
        sizes = np.bincount(labels, minlength=k)
    centroids = np.vstack([_cluster_mean(vectors[labels == j]) for j in range(k)])
    return ClusterAssignment(n_clusters=k, labels=labels, sizes=sizes, centroids=centroids)


def build_auxiliary(game: gm.GameSpec, assignment: ClusterAssignment):
    """Grouped game whose populations carry the within-cluster mean
    parameters; prices and coupling are inherited unchanged.

    Returns ``(aux_game, weights)`` with weights the cluster sizes.  Mean
    parameters that land outside their own feasibility window (possible
    only through round-off) are repaired with a warning; the preferred
    profile is re-projected so the player invariants hold.
    """
    if assignment.labels.size != game.n_players:
        raise ValueError("assignment does not match the game")
    players = []
    for j in range(assignment.n_clusters):
        members = [game.players[i] for i in np.where(assignment.labels == j)[0]]
        vecs = np.vstack([player_vector(p) for p in members])
        if np.all(vecs == vecs[0]):
            players.append(members[0])
            continue
        omega, preferred, energy, lower, upper = unpack_player_vector(
            _cluster_mean(vecs), game.horizon)
        lo_sum, up_sum = lower.sum(), upper.sum()
        if energy < lo_sum or energy > up_sum:
            warnings.warn(f"cluster {j}: repaired infeasible mean energy {energy}")
            energy = float(np.clip(energy, lo_sum, up_sum))
        preferred = project_box_simplex(BoxSimplexSet(lower, upper, energy), preferred)
        players.append(gm.PlayerParams(omega=omega, preferred=preferred,
                                       energy=energy, lower=lower, upper=upper))
    aux = gm.GameSpec(
        n_players=assignment.n_clusters,
        horizon=game.horizon,
        players=tuple(players),
        prices=game.prices,
        coupling=game.coupling,
        convention=game.convention,
    )
    return aux, assignment.sizes.astype(float)


def compute_indicators(game: gm.GameSpec, aux: gm.GameSpec,
                       assignment: ClusterAssignment,
                       n_dirs: int = 512, seed: int = 0):
    """Heterogeneity indicators of a grouping.

    ``set_gap``: worst member-to-population Hausdorff distance between
    action sets, sampled with ``n_dirs`` support-function directions.
    ``grad_gap``: worst member-to-population subgradient distance; for the
    quadratic utility family the subdifferentials are singletons and a
    closed form applies,

        2 * ( |omega_i - omega_n| * r_m + ||omega_i y_i - omega_n y_n|| )

    with ``r_m`` a norm bound on the enlarged evaluation set (radius plus
    ``set_gap``).  The shared price term cancels because both costs are
    compared at the same point.
    """
    member_sets = [gm.action_set(p) for p in game.players]
    pop_sets = [gm.action_set(p) for p in aux.players]
    set_gap = 0.0
    for n, lab in enumerate(assignment.labels):
        set_gap = max(set_gap, hausdorff_estimate(member_sets[n], pop_sets[lab], n_dirs, seed))
    radius = max(
        max(radius_bound(s) for s in member_sets),
        max(radius_bound(s) for s in pop_sets),
    )
    r_m = radius + set_gap
    grad_gap = 0.0
    for n, lab in enumerate(assignment.labels):
        p, q = game.players[n], aux.players[lab]
        grad_gap = max(
            grad_gap,
            2.0 * (abs(q.omega - p.omega) * r_m
                   + float(np.linalg.norm(q.omega * q.preferred - p.omega * p.preferred))),
        )
    return set_gap, grad_gap


def max_coupling_margin(game: gm.GameSpec) -> float:
    """LP value: the largest uniform normalized slack of the coupling rows
    reachable by some feasible profile (in the game's native aggregate
    units); +inf when the game has no coupling, negative when no feasible
    profile satisfies the coupling."""
    if game.coupling is None:
        return float("inf")
    n, t = game.n_players, game.horizon
    a_mat, b_vec = game.coupling.matrix, game.coupling.rhs
    row_norms = np.linalg.norm(a_mat, axis=1)
    row_norms = np.where(row_norms > 1e-300, row_norms, 1.0)
    conv = 1.0 / n if game.convention == gm.AGG_AVERAGE else 1.0

    n_var = n * t + 1
    cost = np.zeros(n_var)
    cost[-1] = -1.0
    a_ub = np.zeros((a_mat.shape[0], n_var))
    a_ub[:, :n * t] = np.tile(a_mat * conv, (1, n))
    a_ub[:, -1] = row_norms
    budget_rows = [i for i, p in enumerate(game.players) if p.energy is not None]
    a_eq = np.zeros((len(budget_rows), n_var))
    b_eq = np.zeros(len(budget_rows))
    for r, i in enumerate(budget_rows):
        a_eq[r, i * t:(i + 1) * t] = 1.0
        b_eq[r] = game.players[i].energy
    bounds = []
    for p in game.players:
        bounds.extend(zip(p.lower.tolist(), p.upper.tolist()))
    bounds.append((None, None))
    res = linprog(cost, A_ub=a_ub, b_ub=b_vec,
                  A_eq=a_eq if budget_rows else None,
                  b_eq=b_eq if budget_rows else None,
                  bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"coupling margin LP failed: {res.message}")
    return float(res.x[-1])


@dataclass(frozen=True)
class GameConstants:
    """Regularity constants in the average-aggregate normalization.

    ``own_lipschitz`` bounds the per-player cost variation in the own
    action; ``agg_lipschitz`` is an upper estimate of the variation in the
    aggregate argument (max price slope x radius, rescaled by N under the
    sum convention); ``radius`` bounds every action-set norm; ``margin``
    is the interior-margin estimate: some coupled-feasible profile keeps
    at least this distance from every action set's relative boundary.
    """

    own_lipschitz: float
    agg_lipschitz: float
    radius: float
    margin: float


def compute_constants(game: gm.GameSpec, enlargement: float = 0.0) -> GameConstants:
    """Closed-form upper estimates of the regularity constants.

    ``enlargement`` is the radius by which the evaluation set is inflated
    around the hull of the action sets (pass the computed ``set_gap`` when
    certifying a reduction; 0 for the plain game).
    """
    if game.custom_costs is not None:
        raise ValueError("constants need the congestion family")
    sets = [gm.action_set(p) for p in game.players]
    radius = max(radius_bound(s) for s in sets)
    conv = 1.0 / game.n_players if game.convention == gm.AGG_AVERAGE else 1.0

    # Price magnitude at the largest reachable (inflated) per-period load.
    axes = np.eye(game.horizon)
    max_load = sum(support_function_batch(s, axes) + enlargement for s in sets) * conv
    pv = np.array([pf.value_any(load) for pf, load in zip(game.prices, np.asarray(max_load))])
    price_part = float(np.linalg.norm(pv))
    diam = 2.0 * radius + 2.0 * enlargement
    own_lip = max(price_part + 2.0 * p.omega * diam for p in game.players)

    max_slope = max(float(pf.slopes.max()) for pf in game.prices)
    agg_lip = max_slope * radius * (game.n_players if game.convention == gm.AGG_SUM else 1.0)

    eta = min(inradius(s) for s in sets)
    if game.coupling is None:
        margin = eta
    else:
        slack = max_coupling_margin(game)
        slack_avg = slack * (1.0 / game.n_players if game.convention == gm.AGG_SUM else 1.0)
        # The interior-profile construction moves a fraction t = slack/(3R)
        # toward the per-set margin maximizers; t caps at 1.
        margin = eta * min(1.0, max(slack_avg, 0.0) / (3.0 * radius))
    return GameConstants(own_lipschitz=own_lip, agg_lipschitz=agg_lip,
                         radius=radius, margin=margin)


def error_constant(own_lipschitz: float, margin: float, radius: float,
                   set_gap: float, grad_gap: float) -> float:
    """Reduction error constant 2R(3 L1 set_gap / margin + grad_gap)."""
    if margin <= 0:
        raise ValueError("margin must be positive")
    return 2.0 * radius * (3.0 * own_lipschitz * set_gap / margin + grad_gap)


def lift_profile(aux_profile, assignment: ClusterAssignment) -> np.ndarray:
    """Copy each population action to all of its members."""
    aux_profile = np.atleast_2d(np.asarray(aux_profile, dtype=float))
    if aux_profile.shape[0] != assignment.n_clusters:
        raise ValueError("profile rows must match the number of clusters")
    return aux_profile[assignment.labels]


def average_profile(full_profile, assignment: ClusterAssignment) -> np.ndarray:
    """Average the member actions within each cluster."""
    full_profile = np.atleast_2d(np.asarray(full_profile, dtype=float))
    if full_profile.shape[0] != assignment.labels.size:
        raise ValueError("profile rows must match the number of players")
    out = np.zeros((assignment.n_clusters, full_profile.shape[1]))
    for j in range(assignment.n_clusters):
        out[j] = full_profile[assignment.labels == j].mean(axis=0)
    return out


@dataclass(frozen=True)
class ReductionReport:
    """Everything needed to certify a reduction a priori."""

    assignment: ClusterAssignment
    auxiliary_game: gm.GameSpec
    weights: np.ndarray
    set_gap: float
    grad_gap: float
    margin: float
    own_lipschitz: float
    agg_lipschitz: float
    radius: float
    error_const: float
    margin_ok: bool
    n_dirs: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "assignment": {
                "n_clusters": self.assignment.n_clusters,
                "labels": self.assignment.labels.tolist(),
                "sizes": self.assignment.sizes.tolist(),
                "centroids": self.assignment.centroids.tolist(),
            },
            "auxiliary_game": gm.game_to_dict(self.auxiliary_game),
            "weights": self.weights.tolist(),
            "set_gap": float(self.set_gap),
            "grad_gap": float(self.grad_gap),
            "margin": float(self.margin),
            "own_lipschitz": float(self.own_lipschitz),
            "agg_lipschitz": float(self.agg_lipschitz),
            "radius": float(self.radius),
            "error_const": float(self.error_const),
            "margin_ok": bool(self.margin_ok),
            "methods": {
                "set_gap": f"support-function sampling, {self.n_dirs} directions, seed {self.seed}",
                "grad_gap": "closed form (quadratic utilities)",
                "margin": "interior-margin LP estimate",
                "agg_lipschitz": "closed-form upper estimate",
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ReductionReport":
        a = doc["assignment"]
        assignment = ClusterAssignment(
            n_clusters=int(a["n_clusters"]),
            labels=np.array(a["labels"], dtype=int),
            sizes=np.array(a["sizes"], dtype=int),
            centroids=np.array(a["centroids"], dtype=float),
        )
        method = doc["methods"]["set_gap"]
        n_dirs = int(method.split("sampling, ")[1].split(" directions")[0])
        seed = int(method.rsplit("seed ", 1)[1])
        return cls(
            assignment=assignment,
            auxiliary_game=gm.game_from_dict(doc["auxiliary_game"]),
            weights=np.array(doc["weights"], dtype=float),
            set_gap=float(doc["set_gap"]),
            grad_gap=float(doc["grad_gap"]),
            margin=float(doc["margin"]),
            own_lipschitz=float(doc["own_lipschitz"]),
            agg_lipschitz=float(doc["agg_lipschitz"]),
            radius=float(doc["radius"]),
            error_const=float(doc["error_const"]),
            margin_ok=bool(doc["margin_ok"]),
            n_dirs=n_dirs,
            seed=seed,
        )


def save_report(report: ReductionReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_report(path) -> ReductionReport:
    with open(path) as fh:
        return ReductionReport.from_dict(json.load(fh))


def reduce_game(game: gm.GameSpec, n_clusters: int, seed: int = 0,
                n_dirs: int = 512) -> ReductionReport:
    """Full reduction pipeline: cluster, build the auxiliary game, compute
    the heterogeneity indicators and the error constant."""
    vectors = np.vstack([player_vector(p) for p in game.players])
    assignment = kmeans(vectors, n_clusters, seed=seed)
    aux, weights = build_auxiliary(game, assignment)
    set_gap, grad_gap = compute_indicators(game, aux, assignment, n_dirs=n_dirs, seed=seed)
    consts = compute_constants(game, enlargement=set_gap)
    radius = max(consts.radius, max(radius_bound(gm.action_set(p)) for p in aux.players))
    k_const = error_constant(consts.own_lipschitz, consts.margin, radius, set_gap, grad_gap)
    return ReductionReport(
        assignment=assignment,
        auxiliary_game=aux,
        weights=weights,
        set_gap=float(set_gap),
        grad_gap=float(grad_gap),
        margin=float(consts.margin),
        own_lipschitz=float(consts.own_lipschitz),
        agg_lipschitz=float(consts.agg_lipschitz),
        radius=float(radius),
        error_const=float(k_const),
        margin_ok=bool(set_gap < consts.margin / 2.0),
        n_dirs=n_dirs,
        seed=seed,
    )
