"""Structure-adaptive weighted p-values for spatial multiple testing.

Sites on a 1-3 dimensional lattice carry p-values and a local sparsity
level ``pi1(s)``. Weighted p-values ``min(((1 - pi1) / pi1)^(1/k) p, 1)``
are thresholded by a step-up rule that bounds the expected number of
false positives, and ``k`` is chosen from a grid to maximise rejections.
"""

__version__ = "0.1.0"

from .lattice import Lattice, distance_stencil, euclidean_distance
from .procedures import (
    GridSpec,
    StepUpOutcome,
    bh_procedure,
    laws_procedure,
    lfdr_stepup,
    procedure1_bh,
    procedure1_threshold_form,
    select_k,
    straw_data_driven,
    straw_oracle,
    straw_stepup,
    threshold_form_stepup,
)
from .simulation import (
    SCENARIOS,
    ScenarioConfig,
    SummaryMetrics,
    run_scenario,
    scenario,
    simulate_replication,
)
from .sparsity import KernelSpec, LfdrEstimate, estimate_lfdr, estimate_sparsity, smooth_sparsity
from .weighting import (
    WeightedPValueSet,
    check_assumption_a4,
    efp_bound,
    rescaled_pvalues,
    varphi,
    varphi_inverse,
    weighted_pvalues,
)

__all__ = [
    "GridSpec",
    "KernelSpec",
    "Lattice",
    "LfdrEstimate",
    "SCENARIOS",
    "ScenarioConfig",
    "StepUpOutcome",
    "SummaryMetrics",
    "WeightedPValueSet",
    "bh_procedure",
    "check_assumption_a4",
    "distance_stencil",
    "efp_bound",
    "estimate_lfdr",
    "estimate_sparsity",
    "euclidean_distance",
    "laws_procedure",
    "lfdr_stepup",
    "procedure1_bh",
    "procedure1_threshold_form",
    "rescaled_pvalues",
    "run_scenario",
    "scenario",
    "select_k",
    "simulate_replication",
    "smooth_sparsity",
    "straw_data_driven",
    "straw_oracle",
    "straw_stepup",
    "threshold_form_stepup",
    "varphi",
    "varphi_inverse",
    "weighted_pvalues",
]
