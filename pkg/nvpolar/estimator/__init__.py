from __future__ import annotations

from nvpolar.estimator.chi_squared import CHI2_FLOOR, chi_squared
from nvpolar.estimator.confidence import (
    ELLIPSE_QUANTILE,
    ConfidenceSummary,
    GridResult,
    background_error_sweep,
    confidence_monte_carlo,
    ellipse_area,
    min_acquisition_time,
)
from nvpolar.estimator.fitting import (
    FitHypothesis,
    FitOptions,
    FitResult,
    PairFit,
    Verdict,
    chi2_landscape,
    classify,
    fit_all,
    fit_pair,
    fit_single,
    model_sweep,
)

__all__ = [
    "CHI2_FLOOR",
    "ELLIPSE_QUANTILE",
    "ConfidenceSummary",
    "FitHypothesis",
    "FitOptions",
    "FitResult",
    "GridResult",
    "PairFit",
    "Verdict",
    "background_error_sweep",
    "chi2_landscape",
    "chi_squared",
    "classify",
    "confidence_monte_carlo",
    "ellipse_area",
    "fit_all",
    "fit_pair",
    "fit_single",
    "min_acquisition_time",
    "model_sweep",
]
