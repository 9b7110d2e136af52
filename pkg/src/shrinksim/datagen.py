"""Equicorrelated Gaussian populations with Bernoulli outcomes.

Predictors are drawn with the one-factor construction

    x_j = sqrt(rho) * z0 + sqrt(1 - rho) * z_j,

which has exactly unit variances and pairwise correlation ``rho`` without
needing a Cholesky factor. Outcomes follow a known logistic model whose
intercept is tuned by bisection to hit a target event rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import (
    DegeneratePredictorError,
    InvalidCorrelationError,
    RootFindError,
    SamplingError,
)

__all__ = [
    "TrueModel",
    "Population",
    "Dataset",
    "StandardizationParams",
    "generate_population",
    "solve_intercept",
    "draw_development_sample",
    "standardize",
    "apply_standardization",
]


def _check_rho(rho: float) -> None:
    if not (0.0 <= rho < 1.0):
        raise InvalidCorrelationError(f"rho must lie in [0, 1); got {rho!r}")


@dataclass(frozen=True)
class TrueModel:
    """Data-generating logistic model on standardized predictors."""

    betas: np.ndarray
    intercept: float
    rho: float

    def __post_init__(self):
        betas = np.asarray(self.betas, dtype=float).ravel()
        if betas.size < 1:
            raise ValueError("TrueModel needs at least one predictor")
        object.__setattr__(self, "betas", betas)
        _check_rho(self.rho)

    @property
    def p(self) -> int:
        return self.betas.size

    @property
    def true_mask(self) -> np.ndarray:
        return self.betas != 0

    def correlation_matrix(self) -> np.ndarray:
        p = self.p
        return (1.0 - self.rho) * np.eye(p) + self.rho * np.ones((p, p))


@dataclass(frozen=True)
class Population:
    X: np.ndarray
    y: np.ndarray
    true_risk: np.ndarray

    @property
    def size(self) -> int:
        return self.y.size


@dataclass(frozen=True)
class Dataset:
    """Predictor matrix and binary outcome vector consumed by every fitter."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or X.shape[0] != y.size:
            raise ValueError(f"X shape {X.shape} does not match y length {y.size}")
        if X.shape[1] < 1:
            raise ValueError("Dataset needs at least one predictor column")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("Dataset contains missing or non-finite values")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("outcomes must be coded 0/1")
        if y.min() == y.max():
            raise ValueError("both outcome classes must be present")
        object.__setattr__(self, "X", np.ascontiguousarray(X))
        object.__setattr__(self, "y", np.ascontiguousarray(y))

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def n_events(self) -> int:
        return int(self.y.sum())

    @property
    def event_rate(self) -> float:
        return float(self.y.mean())


@dataclass(frozen=True)
class StandardizationParams:
    means: np.ndarray
    sds: np.ndarray


def _equicorrelated_normal(rng: np.random.Generator, size: int, p: int, rho: float) -> np.ndarray:
    z = rng.standard_normal((size, p + 1))
    X = np.sqrt(1.0 - rho) * z[:, 1:]
    if rho > 0:
        X += np.sqrt(rho) * z[:, :1]
    return X


def generate_population(model: TrueModel, size: int, seed) -> Population:
    """Draw ``size`` individuals from ``model``.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts.
    """
    if size < 1:
        raise ValueError(f"size must be >= 1; got {size}")
    _check_rho(model.rho)
    rng = np.random.default_rng(seed)
    X = _equicorrelated_normal(rng, size, model.p, model.rho)
    risk = expit(model.intercept + X @ model.betas)
    y = (rng.random(size) < risk).astype(float)
    return Population(X=X, y=y, true_risk=risk)


def solve_intercept(
    betas,
    rho: float,
    target_rate: float,
    mc_size: int = 500_000,
    seed=0,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> float:
    """Intercept giving a Monte Carlo mean risk equal to ``target_rate``.

    Bisection on [-20, 20] against one fixed Monte Carlo sample of the
    linear predictor; the mean risk is monotone in the intercept.
    """
    if not (0.0 < target_rate < 1.0):
        raise ValueError(f"target_rate must lie in (0, 1); got {target_rate}")
    _check_rho(rho)
    betas = np.asarray(betas, dtype=float).ravel()
    rng = np.random.default_rng(seed)
    lp = _equicorrelated_normal(rng, mc_size, betas.size, rho) @ betas

    lo, hi = -20.0, 20.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        gap = expit(mid + lp).mean() - target_rate
        if abs(gap) < tol:
            return mid
        if gap > 0:
            hi = mid
        else:
            lo = mid
    raise RootFindError(
        f"intercept bisection did not reach tol={tol} in {max_iter} iterations"
    )


def draw_development_sample(pop: Population, n_events: int, n_total: int, seed) -> Dataset:
    """Stratified draw without replacement with an exact event count."""
    n_nonevents = n_total - n_events
    if n_events < 1 or n_nonevents < 1:
        raise SamplingError(
            f"both classes required; got n_events={n_events}, n_total={n_total}"
        )
    events = np.flatnonzero(pop.y == 1)
    nonevents = np.flatnonzero(pop.y == 0)
    if events.size < n_events or nonevents.size < n_nonevents:
        raise SamplingError(
            f"population has {events.size} events / {nonevents.size} non-events; "
            f"need {n_events} / {n_nonevents}"
        )
    rng = np.random.default_rng(seed)
    idx = np.concatenate([
        rng.choice(events, size=n_events, replace=False),
        rng.choice(nonevents, size=n_nonevents, replace=False),
    ])
    rng.shuffle(idx)
    return Dataset(pop.X[idx], pop.y[idx])


def standardize(dev: Dataset) -> tuple[Dataset, StandardizationParams]:
    """Center and scale each column to mean 0, sd 1 (n - 1 denominator)."""
    means = dev.X.mean(axis=0)
    sds = dev.X.std(axis=0, ddof=1)
    bad = np.flatnonzero(~(sds > 0))
    if bad.size:
        raise DegeneratePredictorError(f"zero-variance predictor column(s): {bad.tolist()}")
    params = StandardizationParams(means=means, sds=sds)
    return apply_standardization(params, dev), params


def apply_standardization(params: StandardizationParams, data: Dataset) -> Dataset:
    return Dataset((data.X - params.means) / params.sds, data.y)
