"""Bounded weight-ratio resampling for sequential Monte Carlo.

Exposes the chop/thin resampler with its expected-linear-time threshold
solver, the standard equal-weight baseline schemes, a bootstrap particle
filter over two benchmark state-space models with exact/numerical oracles,
and reproducible experiment drivers.
"""

from .chopthin import (
    ResampleResult,
    chopthin,
    h_eval,
    solve_a,
    solve_a_oracle,
    systematic_counts,
)
from .experiments import (
    ExperimentConfig,
    ExperimentReport,
    SchemeSpec,
    effort_bench,
    ess_trace,
    mix_seed,
    mse_study,
)
from .models import (
    GridConfig,
    GridPosterior,
    KalmanOutput,
    LinearGaussianModel,
    StochasticVolatilityModel,
    grid_filter,
    kalman_filter,
    make_model,
    simulate,
)
from .particle_filter import DegeneracyError, PfConfig, PfOutput, pf_run
from .resamplers import BASELINE_SCHEMES, SCHEMES, baseline_resample, resample
from .weights import (
    as_weights,
    ess,
    ess_lower_bound,
    eta_for_gamma,
    normalize_to,
    weight_ratio,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "as_weights",
    "ess",
    "normalize_to",
    "weight_ratio",
    "ess_lower_bound",
    "eta_for_gamma",
    "h_eval",
    "systematic_counts",
    "solve_a",
    "solve_a_oracle",
    "chopthin",
    "ResampleResult",
    "SCHEMES",
    "BASELINE_SCHEMES",
    "baseline_resample",
    "resample",
    "LinearGaussianModel",
    "StochasticVolatilityModel",
    "make_model",
    "simulate",
    "KalmanOutput",
    "kalman_filter",
    "GridConfig",
    "GridPosterior",
    "grid_filter",
    "PfConfig",
    "PfOutput",
    "pf_run",
    "DegeneracyError",
    "SchemeSpec",
    "ExperimentConfig",
    "ExperimentReport",
    "mse_study",
    "effort_bench",
    "ess_trace",
    "mix_seed",
]
