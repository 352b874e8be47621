"""Deterministic Monte Carlo co-simulator of dense in-factory wireless
subnetworks, each closing a control loop over an interference-limited
radio link, with control-aware and benchmark resource allocators and a
multi-objective Bayesian parameter tuner."""

from .config import VERSION as __version__
from .config import ConfigError, SimConfig, default_config, load_config
from .engine import (
    POLICY_IDS,
    CcdfTable,
    EpisodeContext,
    EpisodeResult,
    count_execution_costs,
    evaluate_params,
    make_policy,
    nearest_rank_percentile,
    objectives,
    pooled_costs,
    run_compare,
    run_episode,
    run_montecarlo,
)

__all__ = [
    "__version__",
    "ConfigError",
    "SimConfig",
    "default_config",
    "load_config",
    "POLICY_IDS",
    "CcdfTable",
    "EpisodeContext",
    "EpisodeResult",
    "count_execution_costs",
    "evaluate_params",
    "make_policy",
    "nearest_rank_percentile",
    "objectives",
    "pooled_costs",
    "run_compare",
    "run_episode",
    "run_montecarlo",
]
