"""Wavelet-based JPEG IV estimation for endogenously truncated data."""

from .denoise import (
    DenoiseResult,
    PenaltyConfig,
    default_gamma_menu,
    default_lambda_grid,
    noise_scale,
    penalized_fit,
    select_thresholds,
)
from .dgp import (
    DisturbanceSpec,
    Dgp1Params,
    GeneratedSample,
    generate,
    mixture_cdf,
    mixture_quantile,
    sample_clayton,
)
from .estimator import (
    DenoisePolicy,
    EstimationResult,
    TruncatedSample,
    fit_partially_linear,
    iv_2sls,
    jpeg_iv,
    ols,
)
from .grid_series import (
    GridSeries,
    LevelSchedule,
    interleave_merge,
    interleave_split,
    read_series_csv,
    validate,
    write_series_csv,
)
from .lifting import (
    WaveletCoefficients,
    build_matrix_oracle,
    forward_transform,
    inverse_transform,
    transposed_inverse_transform,
)
from .montecarlo import (
    METHODS,
    ExperimentPlan,
    SummaryTable,
    convergence_delta,
    relative_accuracy,
    rmse,
    run,
    write_outputs,
)

__all__ = [
    "METHODS",
    "DenoisePolicy",
    "DenoiseResult",
    "DisturbanceSpec",
    "Dgp1Params",
    "EstimationResult",
    "ExperimentPlan",
    "GeneratedSample",
    "GridSeries",
    "LevelSchedule",
    "PenaltyConfig",
    "SummaryTable",
    "TruncatedSample",
    "WaveletCoefficients",
    "build_matrix_oracle",
    "convergence_delta",
    "default_gamma_menu",
    "default_lambda_grid",
    "fit_partially_linear",
    "forward_transform",
    "generate",
    "interleave_merge",
    "interleave_split",
    "inverse_transform",
    "iv_2sls",
    "jpeg_iv",
    "mixture_cdf",
    "mixture_quantile",
    "noise_scale",
    "ols",
    "penalized_fit",
    "read_series_csv",
    "relative_accuracy",
    "rmse",
    "run",
    "sample_clayton",
    "select_thresholds",
    "transposed_inverse_transform",
    "validate",
    "write_outputs",
    "write_series_csv",
]
