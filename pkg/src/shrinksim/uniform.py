"""Uniform shrinkage of ML coefficients with intercept re-estimation.

Two estimates of the common factor ``s`` are provided: the likelihood-ratio
heuristic ``(chi2 - df) / chi2`` and a bootstrap estimate equal to the mean
calibration slope of bootstrap-sample models evaluated on the original
sample.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels as K
from ._rng import as_seed_sequence, child
from .datagen import Dataset
from .errors import BootstrapFailureError, ConvergenceError, UndefinedFactorError
from .glm import (
    FitOptions,
    FitResult,
    Method,
    fit_logistic_arrays,
    fit_ml,
    log_likelihood,
    lr_chi_square,
    refit_intercept,
)

__all__ = [
    "UniformShrinkage",
    "likelihood_factor",
    "likelihood_uniform",
    "bootstrap_factor",
    "bootstrap_uniform",
]

_SLOPE_OPTS = FitOptions(max_iter=100, tol=1e-10)


@dataclass(frozen=True)
class UniformShrinkage:
    factor: float
    kind: str  # "likelihood" or "bootstrap"
    bootstrap_reps: int | None = None
    attempts: int | None = None


def likelihood_factor(chi2: float, df: int) -> float:
    if chi2 == 0:
        raise UndefinedFactorError("likelihood-ratio statistic is zero")
    return (chi2 - df) / chi2


def _shrunk_fit(ml_fit: FitResult, data: Dataset, factor: float, method: Method,
                opts: FitOptions) -> FitResult:
    betas = factor * ml_fit.betas
    alpha = refit_intercept(betas, data, opts, start=ml_fit.intercept)
    return FitResult(
        intercept=alpha,
        betas=betas,
        method=method,
        log_lik=log_likelihood(alpha, betas, data),
        converged=True,
        shrinkage_factor=factor,
    )


def likelihood_uniform(ml_fit: FitResult, data: Dataset, df: int | None = None,
                       opts: FitOptions | None = None) -> FitResult:
    """Scale ML coefficients by ``(chi2 - df) / chi2`` and refit the intercept.

    Negative factors (``chi2 < df``) are applied as they are.
    """
    opts = opts or FitOptions()
    df = data.p if df is None else df
    chi2 = lr_chi_square(ml_fit, data)
    fit = _shrunk_fit(ml_fit, data, likelihood_factor(chi2, df), Method.LU, opts)
    fit.info["chi2"] = chi2
    return fit


def _resample_with_replacement(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.integers(0, n, size=n)


def bootstrap_factor(
    data: Dataset,
    B: int = 200,
    opts: FitOptions | None = None,
    seed=None,
    resample: Callable[[np.random.Generator, int], np.ndarray] = _resample_with_replacement,
) -> UniformShrinkage:
    """Mean calibration slope of bootstrap models on the original sample.

    Replicate ``b`` draws from its own child stream of ``seed``; a
    replicate whose ML fit shows separation (or has a single outcome class)
    is redrawn from the same stream. At most ``10 * B`` draws in total.
    """
    if B < 1:
        raise ValueError(f"B must be >= 1; got {B}")
    opts = opts or FitOptions()
    X, y = data.X, data.y
    n = data.n
    root = as_seed_sequence(seed)
    cap = 10 * B
    attempts = 0
    slopes = np.empty(B)
    for b in range(B):
        rng = np.random.default_rng(child(root, b))
        while True:
            if attempts >= cap:
                raise BootstrapFailureError(
                    f"{cap} bootstrap draws exhausted with {b} usable replicates"
                )
            attempts += 1
            idx = resample(rng, n)
            yb = y[idx]
            nb = yb.sum()
            if nb == 0 or nb == n:
                continue
            theta, _, status, _, separated = fit_logistic_arrays(X[idx], yb, opts)
            if separated:
                continue
            lp = K.linear_predictor(X, theta)
            if np.ptp(lp) == 0:
                continue
            cal, _, cstatus, _, _ = fit_logistic_arrays(lp[:, None], y, _SLOPE_OPTS)
            if cstatus != K.CONVERGED:
                continue
            slopes[b] = cal[1]
            break
    return UniformShrinkage(
        factor=float(slopes.mean()), kind="bootstrap", bootstrap_reps=B, attempts=attempts
    )


def bootstrap_uniform(
    data: Dataset,
    B: int = 200,
    opts: FitOptions | None = None,
    seed=None,
    ml_fit: FitResult | None = None,
    resample: Callable[[np.random.Generator, int], np.ndarray] = _resample_with_replacement,
) -> FitResult:
    """Bootstrap uniform shrinkage of the ML fit on ``data``."""
    opts = opts or FitOptions()
    if ml_fit is None:
        ml_fit = fit_ml(data, opts)
    if ml_fit.separation_detected:
        raise ConvergenceError("ML fit on the original sample shows separation")
    shrink = bootstrap_factor(data, B, opts, seed, resample)
    fit = _shrunk_fit(ml_fit, data, shrink.factor, Method.BU, opts)
    fit.info["bootstrap_attempts"] = shrink.attempts
    return fit
