"""Multi-channel ALOHA and CSMA in continuous time.

Simulation at event level, exact sampling of the admission chain, closed
forms for long-run throughput, and numerical large-deviation rate functions
for attempt and success counts.
"""

from .core import (
    Counts,
    HistoryWindow,
    Params,
    ProtocolKind,
    RandomSource,
    StepRecord,
    validate_params,
)
from .estimators import (
    EmpiricalStringMeasure,
    attempts_bracket,
    build_string_measure,
    default_measure_grid,
    ergodicity_ratio_diagnostic,
    lln_throughput,
    measure_from_csv_lines,
    measure_to_csv_lines,
    pi_means,
    reconstruct_counts,
)
from .event_sim import ArrivalStream, Trace, busy_channels, simulate, success_count
from .kernel import (
    KernelDensity,
    beta,
    beta_integral,
    blocking_profile,
    density,
    gamma,
    run_chain,
    sample_step,
    sigma_marginal,
)
from .ldp import (
    DiscretizedKernel,
    GridSpec,
    RatePoint,
    TailBoundReport,
    TiltedKernelSpec,
    default_grid,
    discretize,
    lambda_cgf,
    rate_I,
    rate_IA,
    rate_IS,
    rate_J,
    tail_bound_check,
    tilt_reduce,
    tilted_entries,
)
from .throughput import (
    ThroughputResult,
    aloha_asymptotic,
    optimize_lambda_aloha,
    poisson_cdf,
    s_aloha,
    s_csma,
)

__version__ = "0.1.0"

__all__ = [
    "ArrivalStream",
    "Counts",
    "DiscretizedKernel",
    "EmpiricalStringMeasure",
    "GridSpec",
    "HistoryWindow",
    "KernelDensity",
    "Params",
    "ProtocolKind",
    "RandomSource",
    "RatePoint",
    "StepRecord",
    "TailBoundReport",
    "ThroughputResult",
    "TiltedKernelSpec",
    "Trace",
    "attempts_bracket",
    "aloha_asymptotic",
    "beta",
    "beta_integral",
    "blocking_profile",
    "build_string_measure",
    "busy_channels",
    "default_grid",
    "default_measure_grid",
    "density",
    "discretize",
    "ergodicity_ratio_diagnostic",
    "gamma",
    "lambda_cgf",
    "lln_throughput",
    "measure_from_csv_lines",
    "measure_to_csv_lines",
    "optimize_lambda_aloha",
    "pi_means",
    "poisson_cdf",
    "rate_I",
    "rate_IA",
    "rate_IS",
    "rate_J",
    "reconstruct_counts",
    "run_chain",
    "s_aloha",
    "s_csma",
    "sample_step",
    "sigma_marginal",
    "simulate",
    "success_count",
    "tail_bound_check",
    "tilt_reduce",
    "tilted_entries",
    "validate_params",
    "__version__",
]
