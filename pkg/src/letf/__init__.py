"""Linear ensemble transform filters for sequential data assimilation.

Ensemble containers and statistics (:mod:`letf.core`), chaotic test models
(:mod:`letf.models`), discrete optimal transport (:mod:`letf.transport`),
the global filter family (:mod:`letf.filters`), localization
(:mod:`letf.localization`), skill metrics (:mod:`letf.diagnostics`) and the
experiment harness (:mod:`letf.harness`).
"""

from .core import (
    AnalysisResult,
    ObservationModel,
    apply_transform,
    cross_covariance,
    ensemble_covariance,
    ensemble_deviations,
    ensemble_mean,
)
from .filters import (
    apply_inflation,
    effective_sample_size,
    enkf_perturbed_analysis,
    esrf_analysis,
    etpf_analysis,
    importance_weights,
    realize_resampling,
    residual_resampling,
    resampling_coupling,
    rng_stream,
    sir_analysis,
    stochastic_etpf_analysis,
)
from .localization import (
    GridGeometry,
    LocalizationConfig,
    kernel_gaspari_cohn,
    kernel_triangular,
    letkf_analysis,
    localized_etpf_analysis,
    periodic_distance,
)
from .models import (
    FlowMapConfig,
    OdeModel,
    flow_map,
    implicit_midpoint_step,
    lorenz63_model,
    lorenz63_rhs,
    lorenz96_model,
    lorenz96_rhs,
)
from .transport import (
    CouplingMatrix,
    check_cyclical_monotonicity,
    coupling_to_transform,
    gaussian_optimal_map,
    sinkhorn_coupling,
    solve_optimal_coupling,
    squared_distance_cost,
)

__version__ = "0.1.0"
