"""Distributional regression: formulas, families, backfitting, boosting and MCMC."""

from ._core import (
    ConfigError,
    DataError,
    Error,
    Family,
    FormulaError,
    Model,
    NumericalError,
    crps,
    crps_gaussian,
    default_output_root,
    family,
    fit,
    fit_model,
    gibbs_lm,
    predict,
    pspline_basis,
    simulate,
    summarize,
    summary,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Error",
    "Family",
    "FormulaError",
    "Model",
    "NumericalError",
    "crps",
    "crps_gaussian",
    "default_output_root",
    "family",
    "fit",
    "fit_model",
    "gibbs_lm",
    "predict",
    "pspline_basis",
    "simulate",
    "summarize",
    "summary",
]
