"""Shrinkage and penalization for logistic prediction models: fitters and a simulation harness."""

from .datagen import (
    Dataset,
    Population,
    StandardizationParams,
    TrueModel,
    apply_standardization,
    draw_development_sample,
    generate_population,
    solve_intercept,
    standardize,
)
from .firth import FirthOptions, fit_firth
from .glm import FitOptions, FitResult, Method, fit_ml, linear_predictor, log_likelihood, lr_chi_square, refit_intercept
from .harness import HarnessConfig, PredictorSet, Scenario, enumerate_scenarios, run_scenario, run_study, write_results
from .metrics import aggregate_slopes, c_statistic, calibration_slope, shrinkage_correlation, slope_for_run
from .penalized import (
    PenaltySpec,
    cv_deviance,
    fit_adaptive_lasso,
    fit_at_lambda,
    fit_garrote,
    fit_lasso,
    fit_pml,
    fit_ridge,
    lambda_grid,
    make_cv_plan,
)
from .uniform import bootstrap_uniform, likelihood_uniform

__version__ = "0.1.0"

__all__ = [
    "Dataset", "Population", "StandardizationParams", "TrueModel", "apply_standardization",
    "draw_development_sample", "generate_population", "solve_intercept", "standardize",
    "FirthOptions", "fit_firth",
    "FitOptions", "FitResult", "Method", "fit_ml", "linear_predictor", "log_likelihood",
    "lr_chi_square", "refit_intercept",
    "HarnessConfig", "PredictorSet", "Scenario", "enumerate_scenarios", "run_scenario",
    "run_study", "write_results",
    "aggregate_slopes", "c_statistic", "calibration_slope", "shrinkage_correlation", "slope_for_run",
    "PenaltySpec", "cv_deviance", "fit_adaptive_lasso", "fit_at_lambda", "fit_garrote",
    "fit_lasso", "fit_pml", "fit_ridge", "lambda_grid", "make_cv_plan",
    "bootstrap_uniform", "likelihood_uniform",
]
