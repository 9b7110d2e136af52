"""Validation metrics and across-run aggregation.

Slopes are winsorized at ``WINSOR_FLOOR`` only for the log-scale summaries
(MAD, RMSD, Spearman correlation); medians and percentiles use raw slopes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .datagen import Dataset, TrueModel
from .errors import UndefinedMetricError
from .glm import FitOptions, FitResult, fit_logistic_arrays, linear_predictor

__all__ = [
    "NO_SELECTION_SLOPE",
    "WINSOR_FLOOR",
    "SlopeSummary",
    "c_statistic",
    "c_statistic_pairs",
    "calibration_slope",
    "slope_for_run",
    "winsorize",
    "aggregate_slopes",
    "shrinkage_correlation",
    "coefficient_bias",
    "selection_stats",
]

NO_SELECTION_SLOPE = 1000.0
WINSOR_FLOOR = 0.01

_SLOPE_OPTS = FitOptions(max_iter=100, tol=1e-10)


def _binary(outcomes) -> np.ndarray:
    y = np.asarray(outcomes, dtype=float).ravel()
    n1 = int(y.sum())
    if n1 == 0 or n1 == y.size:
        raise UndefinedMetricError("both outcome classes are required")
    return y


def c_statistic(scores, outcomes) -> float:
    """Concordance probability via the Mann-Whitney rank sum (ties count 1/2)."""
    s = np.asarray(scores, dtype=float).ravel()
    y = _binary(outcomes)
    if s.size != y.size:
        raise ValueError("scores and outcomes differ in length")
    ranks = stats.rankdata(s)
    n1 = y.sum()
    n0 = y.size - n1
    u = ranks[y == 1].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def c_statistic_pairs(scores, outcomes) -> float:
    """O(n^2) pair count; reference implementation for small inputs."""
    s = np.asarray(scores, dtype=float).ravel()
    y = _binary(outcomes)
    pos = s[y == 1]
    neg = s[y == 0]
    diff = pos[:, None] - neg[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / diff.size)


def calibration_slope(lp, outcomes) -> float:
    """Slope of a logistic regression of ``outcomes`` on ``lp`` (intercept free)."""
    lp = np.asarray(lp, dtype=float).ravel()
    y = _binary(outcomes)
    if not np.all(np.isfinite(lp)):
        raise UndefinedMetricError("linear predictor has non-finite values")
    if np.ptp(lp) == 0:
        raise UndefinedMetricError("constant linear predictor: slope undefined")
    theta, _, status, _, _ = fit_logistic_arrays(lp[:, None], y, _SLOPE_OPTS)
    if status != 0:
        raise UndefinedMetricError(f"calibration fit failed (status {status})")
    return float(theta[1])


def slope_for_run(fit: FitResult, validation: Dataset) -> float:
    """Calibration slope, or 1000 when the model has no non-zero coefficient."""
    if not np.any(fit.betas != 0):
        return NO_SELECTION_SLOPE
    return calibration_slope(linear_predictor(fit, validation.X), validation.y)


def winsorize(slopes, floor: float = WINSOR_FLOOR) -> np.ndarray:
    return np.maximum(np.asarray(slopes, dtype=float), floor)


@dataclass(frozen=True)
class SlopeSummary:
    median: float
    p5: float
    p95: float
    mad_log: float
    rmsd_log: float


def aggregate_slopes(slopes: Sequence[float]) -> SlopeSummary:
    raw = np.asarray(slopes, dtype=float).ravel()
    if raw.size == 0:
        raise ValueError("no slopes to aggregate")
    # sorted so sums, and hence the summary, do not depend on input order
    logs = np.sort(np.log(winsorize(raw)))
    median, p5, p95 = np.percentile(raw, [50, 5, 95])
    return SlopeSummary(
        median=float(median),
        p5=float(p5),
        p95=float(p95),
        mad_log=float(np.median(np.abs(logs - np.median(logs)))),
        rmsd_log=float(np.sqrt(np.mean(logs**2))),
    )


def shrinkage_correlation(method_slopes, ml_slopes) -> float | None:
    """Spearman correlation of estimated versus optimal shrinkage.

    Returns ``None`` when either series has zero variance.
    """
    m = np.asarray(method_slopes, dtype=float).ravel()
    ml = np.asarray(ml_slopes, dtype=float).ravel()
    if m.size != ml.size:
        raise ValueError(f"length mismatch: {m.size} vs {ml.size}")
    log_ml = np.log(winsorize(ml))
    optimal = -log_ml
    estimated = np.log(winsorize(m)) - log_ml
    if m.size < 2 or np.ptp(optimal) == 0 or np.ptp(estimated) == 0:
        return None
    rho = stats.spearmanr(estimated, optimal).statistic
    return None if not np.isfinite(rho) else float(rho)


def coefficient_bias(fits: Sequence[FitResult], true_model: TrueModel) -> dict:
    """Mean signed bias on true predictors and mean estimate on noise predictors.

    Bias on a true predictor is ``sign(beta) * (estimate - beta)`` so that a
    positive value always means bias away from zero.
    """
    betas = true_model.betas
    true = betas != 0
    est = np.array([f.betas for f in fits], dtype=float).reshape(-1, betas.size)
    out = {"mean_bias_true": None, "mean_bias_noise": None}
    if est.shape[0] == 0:
        return out
    if true.any():
        dev = np.sign(betas[true]) * (est[:, true] - betas[true])
        out["mean_bias_true"] = float(dev.mean())
    if (~true).any():
        out["mean_bias_noise"] = float(est[:, ~true].mean())
    return out


def selection_stats(fits: Sequence[FitResult], true_model: TrueModel) -> dict:
    noise = true_model.betas == 0
    masks = np.array([f.betas != 0 for f in fits], dtype=bool).reshape(-1, noise.size)
    if masks.shape[0] == 0:
        return {"mean_n_selected": None, "mean_n_noise_selected": None}
    return {
        "mean_n_selected": float(masks.sum(axis=1).mean()),
        "mean_n_noise_selected": float(masks[:, noise].sum(axis=1).mean()),
    }
