"""Geometry-aware truncation sampling over token-embedding metrics."""

from .baselines import BaselineConfig, apply_baseline
from .decoder import (
    StepReport,
    TopWConfig,
    WarmStart,
    pool_exactness_probe,
    process_logits,
    sample_from_masked,
)
from .geometry import TokenMetric, UniformMetric, batched_dist_to_set, build_metric
from .objective import (
    ObjectiveParams,
    ScoredPool,
    combined_scores,
    eval_F_exact,
    eval_F_expanded,
    eval_G,
    surrogate_constant,
)
from .potentials import Potential, attraction_potential, custom_potential, repulsion_potential
from .selection import TieBreak, beta_sweep_gammas, brute_force_s_step, s_step
from .simplex import Crop, Dist, conditional, crop, cropped_entropy_identity, entropy, from_logits
from .transport import (
    check_lipschitz,
    factorization_residual,
    kr_dual_gap,
    kr_optimal_potential,
    w1_exact,
    w1_uniform_metric,
)
from .trace import TraceBundle, load_trace, save_trace, synth_trace

__version__ = "0.1.0"

__all__ = [
    "BaselineConfig",
    "Crop",
    "Dist",
    "ObjectiveParams",
    "Potential",
    "ScoredPool",
    "StepReport",
    "TieBreak",
    "TokenMetric",
    "TopWConfig",
    "TraceBundle",
    "UniformMetric",
    "WarmStart",
    "apply_baseline",
    "attraction_potential",
    "batched_dist_to_set",
    "beta_sweep_gammas",
    "brute_force_s_step",
    "build_metric",
    "check_lipschitz",
    "combined_scores",
    "conditional",
    "crop",
    "cropped_entropy_identity",
    "custom_potential",
    "entropy",
    "eval_F_exact",
    "eval_F_expanded",
    "eval_G",
    "factorization_residual",
    "from_logits",
    "kr_dual_gap",
    "kr_optimal_potential",
    "load_trace",
    "pool_exactness_probe",
    "process_logits",
    "repulsion_potential",
    "s_step",
    "sample_from_masked",
    "save_trace",
    "surrogate_constant",
    "synth_trace",
    "w1_exact",
    "w1_uniform_metric",
]
