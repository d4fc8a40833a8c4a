"""Sensitivity analysis for difference-in-differences designs under joint
relaxations of parallel trends and no anticipation: sharp treatment-effect
bounds, breakdown frontiers, and cluster-weighted bootstrap inference."""

from .breakdown import (
    admissible_magnitude_limit,
    breakdown_effect_shares,
    breakdown_pretrend,
    breakdown_sign_pretrend,
    frontier_grid,
    in_robust_region,
)
from .core_bounds import (
    anticipation_level,
    att_from_decomposition,
    classify_single_pretrend,
    effect_shares_feasible,
    identified_set_from_effect_shares,
    identified_set_from_increments,
    identified_set_from_pretrend_shares,
    implied_violation,
    onesided_share_limit,
    symmetric_share_limit,
    width_comparison,
)
from .estimation import (
    PanelDataset,
    PosteriorDraws,
    bayesian_bootstrap,
    cluster_bootstrap,
    compute_reduced_form,
    posterior_summary,
)
from .inference import (
    CredibleSet,
    LowerBand,
    inner_robust_region,
    pointwise_credible_set,
    simultaneous_lower_band,
)
from .oracle import (
    DgpSpec,
    construct_attaining_dgp,
    lattice_extremes_effect_shares,
    lattice_extremes_increments,
    lattice_extremes_pretrend_shares,
    verify_dgp,
)
from .types import (
    AnticipationIncrementBounds,
    Conclusion,
    CornerWitness,
    DegenerateShareError,
    DidSensError,
    DimensionMismatchError,
    FrontierGrid,
    InfeasibleSharesError,
    InternalInvariantError,
    Interval,
    PanelFormatError,
    PretrendShareBounds,
    ReducedForm,
    RelativeMagnitude,
    SinglePretrendCase,
    TreatmentShareBounds,
    WidthComparison,
)

__version__ = "0.1.0"
