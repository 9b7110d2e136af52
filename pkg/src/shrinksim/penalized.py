"""Penalized logistic regression tuned over a shared lambda grid.

Ridge, LASSO, adaptive LASSO and the non-negative garrote maximize the
penalized *mean* log-likelihood

    (1/n) loglik(alpha, beta) - lam * P(beta)

and pick ``lam`` by stratified K-fold cross-validated deviance. Penalized
maximum likelihood (PML) keeps the penalty on the *total* log-likelihood,

    loglik(alpha, beta) - 0.5 * lam * sum((s_j * beta_j)^2),

and picks ``lam`` by AICc with a trace-based effective degrees of freedom.
The intercept is never penalized.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import log_expit

from . import _kernels as K
from .datagen import Dataset
from .errors import CvInfeasibleError, ConvergenceError
from .glm import FitOptions, FitResult, Method, log_likelihood, refit_intercept

__all__ = [
    "LAMBDA_MIN",
    "LAMBDA_MAX",
    "LambdaGrid",
    "lambda_grid",
    "CvPlan",
    "make_cv_plan",
    "PenaltyKind",
    "PenaltySpec",
    "penalized_objective",
    "fit_at_lambda",
    "cv_deviance",
    "cv_deviance_path",
    "select_lambda",
    "pml_effective_df",
    "fit_ridge",
    "fit_pml",
    "fit_lasso",
    "fit_adaptive_lasso",
    "fit_garrote",
]

LAMBDA_MIN = 1e-4
LAMBDA_MAX = 64.0
WEIGHT_CAP = 1e10
TIE_TOL = 1e-9

# coefficient-change tolerance of the penalized solver
_SOLVER_TOL = 1e-10


@dataclass(frozen=True)
class LambdaGrid:
    values: np.ndarray

    def __len__(self) -> int:
        return self.values.size

    def __getitem__(self, k):
        return self.values[k]


def lambda_grid(lower: float = LAMBDA_MIN, upper: float = LAMBDA_MAX, n_nonzero: int = 250) -> LambdaGrid:
    """Zero followed by ``n_nonzero`` log-equidistant values from ``lower`` to ``upper``."""
    if not (0 < lower < upper):
        raise ValueError(f"need 0 < lower < upper; got {lower}, {upper}")
    values = np.concatenate([[0.0], np.geomspace(lower, upper, n_nonzero)])
    values[-1] = upper
    return LambdaGrid(values)


@dataclass(frozen=True)
class CvPlan:
    folds: int
    assignments: np.ndarray
    stratified: bool = True
    reduced: bool = False

    def split(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        test = self.assignments == k
        return ~test, test


def make_cv_plan(data: Dataset, folds: int = 10, seed=None) -> CvPlan:
    """Outcome-stratified random fold assignment.

    When a class has fewer than ``folds`` members the fold count is reduced
    to that class size and ``reduced`` is set.
    """
    if folds < 2:
        raise ValueError(f"folds must be >= 2; got {folds}")
    y = data.y
    events = np.flatnonzero(y == 1)
    nonevents = np.flatnonzero(y == 0)
    smallest = min(events.size, nonevents.size)
    if smallest < 2:
        raise CvInfeasibleError(f"smallest outcome class has {smallest} member(s)")
    k = min(folds, smallest)
    rng = np.random.default_rng(seed)
    assign = np.empty(data.n, dtype=np.int64)
    assign[rng.permutation(events)] = np.arange(events.size) % k
    # continue the cycle so overall fold sizes also differ by at most one
    assign[rng.permutation(nonevents)] = (np.arange(nonevents.size) + events.size) % k
    return CvPlan(folds=k, assignments=assign, stratified=True, reduced=k < folds)


class PenaltyKind(str, enum.Enum):
    RIDGE = "Ridge"
    PML = "PML"
    LASSO = "Lasso"
    ADAPTIVE_LASSO = "AdaptiveLasso"
    GARROTE = "Garrote"


_METHOD = {
    PenaltyKind.RIDGE: Method.RIDGE,
    PenaltyKind.PML: Method.PML,
    PenaltyKind.LASSO: Method.LASSO,
    PenaltyKind.ADAPTIVE_LASSO: Method.ADAPTIVE_LASSO,
    PenaltyKind.GARROTE: Method.GARROTE,
}


@dataclass(frozen=True)
class PenaltySpec:
    kind: PenaltyKind
    weights: np.ndarray | None = None
    scaling: np.ndarray | None = None
    init_betas: np.ndarray | None = None
    gamma: float = 1.0

    @classmethod
    def ridge(cls) -> "PenaltySpec":
        return cls(PenaltyKind.RIDGE)

    @classmethod
    def lasso(cls) -> "PenaltySpec":
        return cls(PenaltyKind.LASSO)

    @classmethod
    def pml(cls, data: Dataset) -> "PenaltySpec":
        return cls(PenaltyKind.PML, scaling=data.X.std(axis=0, ddof=1))

    @classmethod
    def adaptive_lasso(cls, init_betas, gamma: float = 1.0) -> "PenaltySpec":
        init = np.asarray(init_betas, dtype=float).ravel()
        with np.errstate(divide="ignore"):
            w = np.minimum(1.0 / np.abs(init) ** gamma, WEIGHT_CAP)
        return cls(PenaltyKind.ADAPTIVE_LASSO, weights=w, init_betas=init, gamma=gamma)

    @classmethod
    def garrote(cls, init_betas) -> "PenaltySpec":
        return cls(PenaltyKind.GARROTE, init_betas=np.asarray(init_betas, dtype=float).ravel())

    @property
    def method(self) -> Method:
        return _METHOD[self.kind]

    def design(self, X: np.ndarray) -> np.ndarray:
        """Predictor matrix the solver sees (garrote works on ``x_j * beta_init_j``)."""
        if self.kind is PenaltyKind.GARROTE:
            return np.ascontiguousarray(X * self.init_betas)
        return np.ascontiguousarray(X)

    def solver_scales(self, p: int, n: int) -> tuple[np.ndarray, np.ndarray, bool]:
        """Per-coefficient (L1, L2) multipliers of lambda in the mean-scale objective."""
        zeros = np.zeros(p)
        ones = np.ones(p)
        if self.kind is PenaltyKind.RIDGE:
            return zeros, ones, False
        if self.kind is PenaltyKind.PML:
            s = ones if self.scaling is None else np.asarray(self.scaling, dtype=float)
            return zeros, 0.5 * s**2 / n, False
        if self.kind is PenaltyKind.LASSO:
            return ones, zeros, False
        if self.kind is PenaltyKind.ADAPTIVE_LASSO:
            return np.asarray(self.weights, dtype=float), zeros, False
        return ones, zeros, True

    def to_coefficients(self, theta: np.ndarray) -> tuple[float, np.ndarray]:
        beta = theta[1:]
        if self.kind is PenaltyKind.GARROTE:
            beta = beta * self.init_betas
        return float(theta[0]), beta.copy()


def penalized_objective(data: Dataset, spec: PenaltySpec, lam: float, alpha: float, params) -> float:
    """Value of the maximized objective, in the method's native scale.

    ``params`` are the regression coefficients, except for the garrote where
    they are the multipliers ``c``.
    """
    params = np.asarray(params, dtype=float).ravel()
    if spec.kind is PenaltyKind.GARROTE:
        ll = log_likelihood(alpha, params * spec.init_betas, data)
        return ll / data.n - lam * params.sum()
    ll = log_likelihood(alpha, params, data)
    if spec.kind is PenaltyKind.PML:
        s = np.ones(data.p) if spec.scaling is None else spec.scaling
        return ll - 0.5 * lam * np.sum((s * params) ** 2)
    l1, l2, _ = spec.solver_scales(data.p, data.n)
    return ll / data.n - lam * np.sum(l1 * np.abs(params) + l2 * params**2)


def _path(X, y, spec: PenaltySpec, lambdas: np.ndarray, max_iter: int):
    """Solve along ``lambdas`` (any order) warm-starting from the largest value."""
    order = np.argsort(-lambdas, kind="stable")
    l1, l2, nonneg = spec.solver_scales(X.shape[1], y.size)
    thetas, status = K.penalized_path(
        spec.design(X), np.ascontiguousarray(y), np.ascontiguousarray(lambdas[order]),
        l1, l2, nonneg, max_iter, _SOLVER_TOL,
    )
    out_t = np.empty_like(thetas)
    out_s = np.empty_like(status)
    out_t[order] = thetas
    out_s[order] = status
    return out_t, out_s


def _make_fit(data: Dataset, spec: PenaltySpec, lam: float, theta: np.ndarray, status: int,
              opts: FitOptions) -> FitResult:
    alpha, betas = spec.to_coefficients(theta)
    if spec.kind is PenaltyKind.GARROTE and status == K.CONVERGED:
        alpha = refit_intercept(betas, data, opts, start=alpha)
    fit = FitResult(
        intercept=alpha,
        betas=betas,
        method=spec.method,
        log_lik=log_likelihood(alpha, betas, data),
        converged=status == K.CONVERGED,
        lam=float(lam),
    )
    if spec.kind is PenaltyKind.GARROTE:
        fit.info["garrote_c"] = theta[1:].copy()
    return fit


def fit_at_lambda(data: Dataset, spec: PenaltySpec, lam: float, opts: FitOptions | None = None,
                  path_from: float | None = LAMBDA_MAX) -> FitResult:
    """Penalized fit at one lambda.

    By default the solution is reached by warm starts down the standard grid
    from ``path_from`` so that small-lambda solves start close to the answer.
    """
    opts = opts or FitOptions()
    if lam < 0:
        raise ValueError(f"lambda must be >= 0; got {lam}")
    lambdas = np.array([lam])
    if path_from is not None and path_from > lam:
        grid = lambda_grid().values
        lambdas = np.concatenate([grid[(grid > lam) & (grid <= path_from)], [lam]])
    thetas, status = _path(data.X, data.y, spec, lambdas, opts.max_iter)
    k = lambdas.size - 1
    return _make_fit(data, spec, lam, thetas[k], int(status[k]), opts)


def _out_of_fold_deviance(X, y, spec: PenaltySpec, thetas: np.ndarray) -> np.ndarray:
    Z = spec.design(X)
    eta = thetas[:, :1] + thetas[:, 1:] @ Z.T
    ll = y * log_expit(eta) + (1 - y) * log_expit(-eta)
    return -2.0 * ll.sum(axis=1)


def cv_deviance_path(data: Dataset, spec: PenaltySpec, grid: LambdaGrid | np.ndarray,
                     plan: CvPlan, opts: FitOptions | None = None):
    """Summed out-of-fold deviance for every grid value.

    Returns ``(deviance, usable)``; a grid value is unusable when any fold
    fit at it failed to converge.
    """
    opts = opts or FitOptions()
    lambdas = np.asarray(getattr(grid, "values", grid), dtype=float)
    dev = np.zeros(lambdas.size)
    usable = np.ones(lambdas.size, dtype=bool)
    for k in range(plan.folds):
        train, test = plan.split(k)
        thetas, status = _path(data.X[train], data.y[train], spec, lambdas, opts.max_iter)
        usable &= status == K.CONVERGED
        dev += _out_of_fold_deviance(data.X[test], data.y[test], spec, thetas)
    usable &= np.isfinite(dev)
    return dev, usable


def cv_deviance(data: Dataset, spec: PenaltySpec, lam: float, plan: CvPlan,
                opts: FitOptions | None = None) -> float:
    """Cross-validated deviance at a single lambda."""
    if lam < 0:
        raise ValueError(f"lambda must be >= 0; got {lam}")
    opts = opts or FitOptions()
    total = 0.0
    for k in range(plan.folds):
        train, test = plan.split(k)
        fold = Dataset(data.X[train], data.y[train])
        fit = fit_at_lambda(fold, spec, lam, opts)
        if not fit.converged:
            raise ConvergenceError(f"fold {k} fit did not converge at lambda={lam}")
        theta = np.concatenate([[fit.intercept], fit.info.get("garrote_c", fit.betas)])
        total += _out_of_fold_deviance(data.X[test], data.y[test], spec, theta[None, :])[0]
    return float(total)


def select_lambda(lambdas: np.ndarray, criterion: np.ndarray, usable: np.ndarray) -> int:
    """Index of the minimizing lambda; near-ties go to the largest lambda."""
    if not usable.any():
        raise ConvergenceError("no grid value produced a usable fit")
    best = criterion[usable].min()
    candidates = np.flatnonzero(usable & (criterion <= best + TIE_TOL))
    return int(candidates[np.argmax(lambdas[candidates])])


def _fit_cv(data: Dataset, spec: PenaltySpec, grid: LambdaGrid, plan: CvPlan,
            opts: FitOptions | None) -> FitResult:
    opts = opts or FitOptions()
    lambdas = grid.values
    dev, usable = cv_deviance_path(data, spec, lambdas, plan, opts)
    k = select_lambda(lambdas, dev, usable)
    lam = float(lambdas[k])
    # full-data path down to the selected value only
    sub = lambdas[lambdas >= lam]
    thetas, status = _path(data.X, data.y, spec, sub, opts.max_iter)
    j = int(np.flatnonzero(sub == lam)[0])
    fit = _make_fit(data, spec, lam, thetas[j], int(status[j]), opts)
    fit.info.update(cv_deviance=float(dev[k]), cv_folds=plan.folds, cv_reduced=plan.reduced)
    return fit


def fit_ridge(data: Dataset, grid: LambdaGrid, plan: CvPlan, opts: FitOptions | None = None) -> FitResult:
    return _fit_cv(data, PenaltySpec.ridge(), grid, plan, opts)


def fit_lasso(data: Dataset, grid: LambdaGrid, plan: CvPlan, opts: FitOptions | None = None) -> FitResult:
    return _fit_cv(data, PenaltySpec.lasso(), grid, plan, opts)


def fit_adaptive_lasso(data: Dataset, grid: LambdaGrid, plan: CvPlan, ml_fit: FitResult,
                       opts: FitOptions | None = None) -> FitResult:
    """LASSO with per-coefficient weights ``1/|beta_ML|`` (capped at 1e10)."""
    return _fit_cv(data, PenaltySpec.adaptive_lasso(ml_fit.betas), grid, plan, opts)


def fit_garrote(data: Dataset, grid: LambdaGrid, plan: CvPlan, ml_fit: FitResult,
                opts: FitOptions | None = None) -> FitResult:
    """Non-negative garrote around the ML coefficients.

    Final coefficients are ``c_j * beta_ML_j`` with ``c_j >= 0``, so no
    coefficient can change sign.
    """
    return _fit_cv(data, PenaltySpec.garrote(ml_fit.betas), grid, plan, opts)


def pml_effective_df(data: Dataset, spec: PenaltySpec, lam: float, alpha: float, betas) -> float:
    """``trace(I (I + P)^-1)`` with I the unpenalized information (intercept included)."""
    betas = np.asarray(betas, dtype=float)
    Xt = np.column_stack([np.ones(data.n), data.X])
    eta = alpha + data.X @ betas
    w = np.exp(log_expit(eta) + log_expit(-eta))
    info = Xt.T @ (Xt * w[:, None])
    s = np.ones(data.p) if spec.scaling is None else spec.scaling
    pen = np.diag(np.concatenate([[0.0], lam * s**2]))
    return float(np.trace(np.linalg.solve(info + pen, info)))


def fit_pml(data: Dataset, grid: LambdaGrid, opts: FitOptions | None = None) -> FitResult:
    """Quadratic penalty on the total log-likelihood, lambda chosen by AICc."""
    opts = opts or FitOptions()
    spec = PenaltySpec.pml(data)
    lambdas = grid.values
    thetas, status = _path(data.X, data.y, spec, lambdas, opts.max_iter)
    n = data.n
    aicc = np.full(lambdas.size, np.inf)
    dfs = np.full(lambdas.size, np.nan)
    for k, lam in enumerate(lambdas):
        if status[k] != K.CONVERGED:
            continue
        a, b = spec.to_coefficients(thetas[k])
        df = pml_effective_df(data, spec, lam, a, b)
        dfs[k] = df
        if n - df - 1 <= 0:
            continue
        aicc[k] = -2.0 * log_likelihood(a, b, data) + 2.0 * df * n / (n - df - 1)
    usable = np.isfinite(aicc)
    k = select_lambda(lambdas, aicc, usable)
    fit = _make_fit(data, spec, lambdas[k], thetas[k], int(status[k]), opts)
    fit.info.update(aicc=float(aicc[k]), df_eff=float(dfs[k]))
    return fit
