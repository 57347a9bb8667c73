"""aggeq: equilibria of large aggregative games with coupling constraints.

Computes variational Nash equilibria and symmetric Wardrop equilibria by
projected subgradient iteration, reduces large games by clustering similar
players into populations, and certifies the reduction error a priori.
"""

from .game import (
    AGG_AVERAGE,
    AGG_SUM,
    CouplingConstraint,
    GameSpec,
    GenericCost,
    MonotonicityReport,
    PlayerParams,
    PriceFunction,
    action_set,
    aggregate_profile,
    classify_monotonicity,
    eval_cost,
    eval_price,
    game_from_dict,
    game_to_dict,
    load_game,
    modified_cost,
    price_subgradient,
    save_game,
    svwe_subgradient,
    vne_subgradient,
)
from .projection import (
    BoxSimplexSet,
    hausdorff_estimate,
    inradius,
    project_box_simplex,
    project_nonneg,
    radius_bound,
    support_function,
)
from .solver import (
    EquilibriumResult,
    SolverConfig,
    coupling_violation,
    gvi_residual,
    solve_svwe,
    solve_vne,
)
from .reduction import (
    ClusterAssignment,
    GameConstants,
    ReductionReport,
    average_profile,
    build_auxiliary,
    compute_constants,
    compute_indicators,
    error_constant,
    kmeans,
    kmeans_objective,
    lift_profile,
    max_coupling_margin,
    player_vector,
    reduce_game,
    unpack_player_vector,
)
from .scenario import ScenarioConfig, ScenarioInfeasibleError, generate, shrink
from .analysis import (
    BoundCertificate,
    combined_bounds,
    fit_rate,
    reduction_bounds,
    relative_aggregate_error,
    similarity_bound,
    vne_svwe_bounds,
)

__version__ = "0.1.0"
