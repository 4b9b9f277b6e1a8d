"""Cross-validated selection among covariance matrix estimators."""

from ._cvcov import (
    ConfigError,
    CvcovError,
    Estimator,
    InvalidInput,
    NumericError,
    SelectionError,
    center_columns,
    competitor_library,
    model_covariance,
    observation_loss,
    sample_covariance,
    sample_gaussian,
    select,
    simulate,
    single_cell_library,
    default_library,
    true_risk_difference,
)

__all__ = [
    "ConfigError",
    "CvcovError",
    "Estimator",
    "InvalidInput",
    "NumericError",
    "SelectionError",
    "center_columns",
    "competitor_library",
    "model_covariance",
    "observation_loss",
    "sample_covariance",
    "sample_gaussian",
    "select",
    "simulate",
    "single_cell_library",
    "default_library",
    "true_risk_difference",
]
