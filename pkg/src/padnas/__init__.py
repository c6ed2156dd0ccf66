"""Progressive layer-wise search-space design for one-shot NAS.

Constrained NSGA-II search over (accuracy, latency), Pareto-front
operation-frequency estimation, threshold pruning, and an M-stage
pipeline that repeats search -> prune -> finetune, with pluggable
architecture-accuracy oracles (synthetic truth, coupled supernet
simulator, or an external evaluator over a line-JSON protocol).
"""

from .analysis import (
    distribution_variance,
    front_tau,
    kendall_tau,
    pareto_front,
    sample_front,
)
from .evolution import (
    CesConfig,
    Individual,
    InfeasibleBandError,
    SearchResult,
    ces_search,
    crowding_distance,
    dominates,
    make_offspring,
    non_dominated_sort,
    spos_search,
)
from .latency import (
    CostModel,
    CoverageError,
    LatencyBand,
    LatencyTable,
    is_feasible,
    latency_extremes,
    load_latency_table,
    predict_latency,
    synth_latency_table,
)
from .oracle import BackendError, Evaluation, Oracle, true_accuracy_fn
from .pipeline import (
    CheckpointError,
    ConfigError,
    PipelineConfig,
    StageReport,
    baseline_summary,
    random_search_baseline,
    run_pipeline,
)
from .pruning import (
    LayerDistribution,
    PruneReport,
    estimate_distributions,
    prune_below_threshold,
    select_counting_set,
    structural_constraint_check,
)
from .space import (
    Architecture,
    LayerSpec,
    Operation,
    PruningFloorError,
    SearchSpace,
    build_space,
    builtin_profile,
    sample_uniform,
    space_from_profile,
)

__version__ = "0.1.0"

__all__ = [
    "Architecture",
    "BackendError",
    "CesConfig",
    "CheckpointError",
    "ConfigError",
    "CostModel",
    "CoverageError",
    "Evaluation",
    "Individual",
    "InfeasibleBandError",
    "LatencyBand",
    "LatencyTable",
    "LayerDistribution",
    "LayerSpec",
    "Operation",
    "Oracle",
    "PipelineConfig",
    "PruneReport",
    "PruningFloorError",
    "SearchResult",
    "SearchSpace",
    "StageReport",
    "baseline_summary",
    "build_space",
    "builtin_profile",
    "ces_search",
    "crowding_distance",
    "distribution_variance",
    "dominates",
    "estimate_distributions",
    "front_tau",
    "is_feasible",
    "kendall_tau",
    "latency_extremes",
    "load_latency_table",
    "make_offspring",
    "non_dominated_sort",
    "pareto_front",
    "predict_latency",
    "prune_below_threshold",
    "random_search_baseline",
    "run_pipeline",
    "sample_front",
    "sample_uniform",
    "select_counting_set",
    "space_from_profile",
    "spos_search",
    "structural_constraint_check",
    "synth_latency_table",
    "true_accuracy_fn",
]
