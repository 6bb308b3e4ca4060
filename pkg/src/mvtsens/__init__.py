"""Sensitivity analysis for causal effects of multivalued treatments.

Estimates average-potential-outcome contrasts from observational data
by stabilized inverse probability weighting, and quantifies how much
unmeasured confounding (bounded on the log-odds scale by lambda) could
move them: each estimand gets a partially identified interval plus a
percentile-bootstrap confidence interval.
"""

__version__ = "0.1.0"

from .errors import (
    DidNotConverge,
    DimensionMismatch,
    EmptyArm,
    EmptyInput,
    EmptyTreatmentLevel,
    InputError,
    InvalidLevelPair,
    LengthMismatch,
    LpInfeasible,
    MissingColumn,
    NonFiniteValue,
    NumericalError,
    ParseError,
    ResampleDegenerate,
    SeparationDetected,
)
from .data import (
    ContrastVector,
    ObservationalDataset,
    Unit,
    all_pairwise_contrasts,
    load_csv,
    pairwise_contrast,
    write_csv,
)
from .gps import (
    ContinuationRatioModel,
    FitConfig,
    FitDiagnostics,
    GpsMatrix,
    GpsSpec,
    MultinomialLogitModel,
    fit_continuation_ratio,
    fit_multinomial_logit,
    load_model,
    predict_gps,
    save_model,
)
from .extrema import (
    ArmExtrema,
    SensitivityParams,
    ZAssignment,
    all_arm_extrema,
    arm_extrema_lp,
    arm_extrema_threshold,
    shifted_gps,
    sipw_estimate,
)
from .contrasts import ContrastResult, contrast_interval, pairwise_ate_table
from .bootstrap import (
    BootstrapConfig,
    ConfidenceInterval,
    bootstrap_bounds,
    bootstrap_ci_table,
    percentile_bootstrap_ci,
    quantile,
)
from .simulation import (
    ScenarioConfig,
    StudyMetrics,
    StudyRow,
    generate_dataset,
    run_study,
    true_interval_oracle,
)

__all__ = [
    "__version__",
    "ArmExtrema", "BootstrapConfig", "ConfidenceInterval",
    "ContinuationRatioModel", "ContrastResult", "ContrastVector",
    "DidNotConverge", "DimensionMismatch", "EmptyArm", "EmptyInput",
    "EmptyTreatmentLevel", "FitConfig", "FitDiagnostics", "GpsMatrix",
    "GpsSpec", "InputError", "InvalidLevelPair", "LengthMismatch",
    "LpInfeasible", "MissingColumn", "MultinomialLogitModel",
    "NonFiniteValue", "NumericalError", "ObservationalDataset",
    "ParseError", "ResampleDegenerate", "ScenarioConfig",
    "SensitivityParams", "SeparationDetected", "StudyMetrics", "StudyRow",
    "Unit", "ZAssignment", "all_arm_extrema", "all_pairwise_contrasts",
    "arm_extrema_lp", "arm_extrema_threshold", "bootstrap_bounds",
    "bootstrap_ci_table", "contrast_interval", "fit_continuation_ratio",
    "fit_multinomial_logit", "generate_dataset", "load_csv", "load_model",
    "pairwise_ate_table", "pairwise_contrast", "percentile_bootstrap_ci",
    "predict_gps", "quantile", "run_study", "save_model", "shifted_gps",
    "sipw_estimate", "true_interval_oracle", "write_csv",
]
