import numpy as np
import pytest
from scipy.special import expit

from shrinksim import _kernels as K
from shrinksim.datagen import Dataset, TrueModel, generate_population
from shrinksim.errors import RankDeficiencyError
from shrinksim.glm import (
    FitOptions,
    FitResult,
    Method,
    fit_ml,
    linear_predictor,
    log_likelihood,
    lr_chi_square,
    refit_intercept,
)


def _data(n, betas, alpha=-0.5, seed=0):
    rng = np.random.default_rng(seed)
    betas = np.asarray(betas, dtype=float)
    X = rng.standard_normal((n, betas.size))
    y = (rng.random(n) < expit(alpha + X @ betas)).astype(float)
    return Dataset(X, y)


def _naive_loglik(alpha, betas, X, y):
    total = 0.0
    for xi, yi in zip(X, y):
        p = 1.0 / (1.0 + np.exp(-(alpha + xi @ betas)))
        total += yi * np.log(p) + (1 - yi) * np.log(1 - p)
    return total


def test_loglik_at_zero():
    d = _data(37, [1.0, -1.0])
    assert log_likelihood(0.0, np.zeros(2), d) == pytest.approx(37 * np.log(0.5), rel=1e-14)


def test_loglik_single_observation():
    d = Dataset(np.array([[2.0], [0.0]]), np.array([1.0, 0.0]))
    # second row contributes log(0.5); the first is the quantity of interest
    value = log_likelihood(0.0, np.array([1.0]), d) - np.log(0.5)
    assert value == pytest.approx(-0.126928011042973, abs=1e-12)


def test_loglik_matches_naive_formula():
    d = _data(60, [0.4, -0.3, 0.2], seed=3)
    b = np.array([0.3, 0.1, -0.7])
    assert log_likelihood(0.2, b, d) == pytest.approx(_naive_loglik(0.2, b, d.X, d.y), abs=1e-12)


def test_ml_consistency_large_n():
    truth = np.array([0.5, -0.8, 0.2])
    pop = generate_population(TrueModel(truth, -0.4, 0.0), 100_000, seed=4)
    fit = fit_ml(Dataset(pop.X, pop.y))
    Xt = np.column_stack([np.ones(pop.size), pop.X])
    p = expit(Xt @ fit.theta)
    cov = np.linalg.inv(Xt.T @ (Xt * (p * (1 - p))[:, None]))
    se = np.sqrt(np.diag(cov))
    assert np.all(np.abs(fit.theta - np.r_[-0.4, truth]) < 3 * se)
    assert fit.converged and not fit.separation_detected


def test_separation_detected():
    x = np.linspace(-1, 1, 20)
    fit = fit_ml(Dataset(x[:, None], (x > 0).astype(float)))
    assert fit.separation_detected


def test_collinear_design_is_rank_deficient():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(50)
    y = (np.arange(50) % 2).astype(float)
    with pytest.raises(RankDeficiencyError):
        fit_ml(Dataset(np.column_stack([x, 2 * x]), y))


def test_intercept_only_closed_form():
    y = np.r_[np.ones(30), np.zeros(70)]
    d = Dataset(np.random.default_rng(0).standard_normal((100, 2)), y)
    assert refit_intercept(np.zeros(2), d) == pytest.approx(np.log(0.3 / 0.7), abs=1e-10)


def test_linear_predictor():
    fit = FitResult(intercept=0.7, betas=np.zeros(2), method=Method.ML, log_lik=0.0)
    assert np.all(linear_predictor(fit, np.ones((4, 2))) == 0.7)
    one = FitResult(intercept=0.0, betas=np.array([1.0]), method=Method.ML, log_lik=0.0)
    col = np.array([0.1, -2.0, 3.5])
    assert np.array_equal(linear_predictor(one, col[:, None]), col)
    with pytest.raises(ValueError):
        linear_predictor(fit, np.ones((4, 3)))


def test_linear_predictor_matches_rowwise():
    d = _data(25, [0.3, 0.1, -0.2], seed=6)
    fit = fit_ml(d)
    rows = [fit.intercept + sum(b * v for b, v in zip(fit.betas, x)) for x in d.X]
    assert np.allclose(linear_predictor(fit, d.X), rows, atol=1e-12, rtol=0)


def test_refit_intercept_identities():
    d = _data(200, [0.6, -0.4], seed=7)
    fit = fit_ml(d)
    assert refit_intercept(fit.betas, d) == pytest.approx(fit.intercept, abs=1e-6)
    a = refit_intercept(0.5 * fit.betas, d)
    assert abs(expit(a + d.X @ (0.5 * fit.betas)).mean() - d.event_rate) < 1e-8


def test_chi_square_null_mean():
    chis = []
    for s in range(200):
        d = _data(400, [0.0, 0.0, 0.0], alpha=0.0, seed=100 + s)
        chis.append(lr_chi_square(fit_ml(d), d))
    assert min(chis) >= 0
    # chi-square(3): mean 3, standard error of the mean sqrt(6/200)
    assert abs(np.mean(chis) - 3.0) < 4 * np.sqrt(6 / 200)


def test_chi_square_tiny_sample_nonnegative():
    checked = 0
    for s in range(30):
        try:
            d = _data(10, [0.0], alpha=0.0, seed=s)
        except ValueError:  # single-class draw
            continue
        assert lr_chi_square(fit_ml(d), d) >= 0
        checked += 1
    assert checked >= 20


def test_chi_square_grows_linearly():
    pop = generate_population(TrueModel(np.array([1.0]), 0.0, 0.0), 40_000, seed=8)
    d1 = Dataset(pop.X[:10_000], pop.y[:10_000])
    d2 = Dataset(pop.X[:20_000], pop.y[:20_000])
    ratio = lr_chi_square(fit_ml(d2), d2) / lr_chi_square(fit_ml(d1), d1)
    assert 1.6 < ratio < 2.4


def test_gradient_at_optimum():
    d = _data(150, [0.5, -0.5, 0.25], seed=9)
    theta = fit_ml(d).theta
    h = 1e-5
    grad = np.empty_like(theta)
    for j in range(theta.size):
        e = np.zeros_like(theta)
        e[j] = h
        grad[j] = (log_likelihood(theta[0] + e[0], theta[1:] + e[1:], d)
                   - log_likelihood(theta[0] - e[0], theta[1:] - e[1:], d)) / (2 * h)
    assert np.max(np.abs(grad)) < 1e-6


def test_irls_loglik_monotone():
    d = _data(80, [1.5, -1.0, 0.5], seed=10)
    _, _, status, n_iter, trace = K.irls(d.X, d.y, 100, 1e-10)
    assert status == K.CONVERGED
    path = trace[: n_iter + 1]
    assert np.all(np.diff(path) >= -1e-12)


def test_affine_invariance():
    d = _data(120, [0.7, -0.2], seed=11)
    X2 = d.X.copy()
    X2[:, 0] = 3.0 * X2[:, 0] - 5.0
    p1 = expit(linear_predictor(fit_ml(d), d.X))
    p2 = expit(linear_predictor(fit_ml(Dataset(X2, d.y)), X2))
    assert np.max(np.abs(p1 - p2)) < 1e-8


def test_fit_options_validation():
    with pytest.raises(ValueError):
        FitOptions(tol=0)
    with pytest.raises(ValueError):
        FitOptions(max_iter=0)
