"""Maximum-likelihood logistic regression and shared fit containers."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, log_expit

from . import _kernels as K
from .datagen import Dataset
from .errors import ConvergenceError, RankDeficiencyError

__all__ = [
    "Method",
    "FitOptions",
    "FitResult",
    "log_likelihood",
    "fit_ml",
    "fit_logistic_arrays",
    "linear_predictor",
    "refit_intercept",
    "lr_chi_square",
    "null_log_likelihood",
]


class Method(str, enum.Enum):
    ML = "ML"
    LU = "LU"
    BU = "BU"
    RIDGE = "Ridge"
    PML = "PML"
    LASSO = "Lasso"
    ADAPTIVE_LASSO = "AdaptiveLasso"
    GARROTE = "Garrote"
    FIRTH = "Firth"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class FitOptions:
    max_iter: int = 100
    tol: float = 1e-8
    prob_epsilon: float = 1e-8

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError(f"tol must be positive; got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1; got {self.max_iter}")


@dataclass
class FitResult:
    intercept: float
    betas: np.ndarray
    method: Method
    log_lik: float
    converged: bool = True
    separation_detected: bool = False
    lam: float | None = None
    shrinkage_factor: float | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.betas = np.asarray(self.betas, dtype=float).ravel()
        self.method = Method(self.method)

    @property
    def selected_mask(self) -> np.ndarray:
        return self.betas != 0

    @property
    def n_selected(self) -> int:
        return int(np.count_nonzero(self.betas))

    @property
    def theta(self) -> np.ndarray:
        return np.concatenate([[self.intercept], self.betas])


def log_likelihood(alpha: float, betas, data: Dataset) -> float:
    """Bernoulli log-likelihood, evaluated without forming log(0)."""
    betas = np.asarray(betas, dtype=float).ravel()
    if betas.size != data.p:
        raise ValueError(f"expected {data.p} coefficients; got {betas.size}")
    eta = alpha + data.X @ betas
    # y*log(pi) + (1-y)*log(1-pi) with log(pi) = log_expit(eta)
    return float(np.sum(data.y * log_expit(eta) + (1 - data.y) * log_expit(-eta)))


def null_log_likelihood(y) -> float:
    y = np.asarray(y, dtype=float)
    n = y.size
    k = y.sum()
    if k == 0 or k == n:
        return 0.0
    return float(k * np.log(k / n) + (n - k) * np.log1p(-k / n))


def fit_logistic_arrays(X: np.ndarray, y: np.ndarray, opts: FitOptions):
    """Run the IRLS kernel on raw arrays.

    Returns ``(theta, loglik, status, n_iter, separated)``; no exceptions
    are raised, so callers can decide how to treat failures.
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    theta, ll, status, n_iter, _ = K.irls(X, y, opts.max_iter, opts.tol)
    separated = status != K.CONVERGED
    if not separated:
        prob = expit(K.linear_predictor(X, theta))
        eps = opts.prob_epsilon
        separated = bool(np.any(prob < eps) or np.any(prob > 1.0 - eps))
    return theta, ll, status, n_iter, separated


def fit_ml(data: Dataset, opts: FitOptions | None = None) -> FitResult:
    """ML logistic regression via IRLS.

    ``separation_detected`` is set when any fitted probability lies within
    ``opts.prob_epsilon`` of 0 or 1, or when IRLS does not converge.
    """
    opts = opts or FitOptions()
    theta, ll, status, n_iter, separated = fit_logistic_arrays(data.X, data.y, opts)
    if status == K.SINGULAR:
        raise RankDeficiencyError("weighted normal equations are singular")
    return FitResult(
        intercept=float(theta[0]),
        betas=theta[1:].copy(),
        method=Method.ML,
        log_lik=float(ll),
        converged=status == K.CONVERGED,
        separation_detected=separated,
        info={"n_iter": int(n_iter)},
    )


def linear_predictor(fit: FitResult, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != fit.betas.size:
        raise ValueError(
            f"X has {X.shape[1]} columns but the fit has {fit.betas.size} coefficients"
        )
    return fit.intercept + X @ fit.betas


def refit_intercept(
    betas_fixed, data: Dataset, opts: FitOptions | None = None, start: float | None = None
) -> float:
    """ML intercept with the slope coefficients held fixed.

    One-dimensional Newton on the score ``sum(y - pi)``; at the returned
    value the mean fitted risk equals the observed event rate.
    """
    opts = opts or FitOptions()
    betas_fixed = np.asarray(betas_fixed, dtype=float).ravel()
    if not np.all(np.isfinite(betas_fixed)):
        raise ValueError("betas_fixed must be finite")
    offset = data.X @ betas_fixed
    target = data.y.sum()
    n = data.n
    ybar = target / n
    alpha = np.log(ybar / (1 - ybar)) if start is None else float(start)
    # a generous cap: Newton on a concave 1-D problem converges quadratically
    for _ in range(max(opts.max_iter, 100)):
        prob = expit(alpha + offset)
        score = target - prob.sum()
        info = np.sum(prob * (1 - prob))
        if abs(score) <= 1e-12 * n:
            return float(alpha)
        if info <= 0:
            break
        step = score / info
        # keep Newton steps bounded when the offset is extreme
        alpha += float(np.clip(step, -5.0, 5.0))
    raise ConvergenceError("intercept refit did not converge")


def lr_chi_square(fit: FitResult, data: Dataset) -> float:
    """Likelihood-ratio statistic of ``fit`` against the intercept-only model."""
    ll = log_likelihood(fit.intercept, fit.betas, data)
    return max(0.0, 2.0 * (ll - null_log_likelihood(data.y)))
