import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.special import expit

from shrinksim.datagen import Dataset, TrueModel
from shrinksim.errors import UndefinedMetricError
from shrinksim.glm import FitResult, Method, fit_ml
from shrinksim.firth import fit_firth
from shrinksim.metrics import (
    NO_SELECTION_SLOPE,
    aggregate_slopes,
    c_statistic,
    c_statistic_pairs,
    calibration_slope,
    coefficient_bias,
    selection_stats,
    shrinkage_correlation,
    slope_for_run,
    winsorize,
)


def _fit(betas, intercept=0.0, method=Method.ML):
    return FitResult(intercept=intercept, betas=np.asarray(betas, dtype=float), method=method, log_lik=0.0)


@pytest.fixture(scope="module")
def self_calibrated():
    rng = np.random.default_rng(0)
    lp = rng.normal(-1.0, 1.2, 100_000)
    y = (rng.random(lp.size) < expit(lp)).astype(float)
    return lp, y


def test_c_statistic_extremes():
    y = np.r_[np.zeros(5), np.ones(5)]
    assert c_statistic(np.arange(10.0), y) == 1.0
    rng = np.random.default_rng(1)
    y = (rng.random(50_000) < 0.3).astype(float)
    assert abs(c_statistic(rng.standard_normal(y.size), y) - 0.5) < 0.01


def test_c_statistic_matches_pair_count():
    rng = np.random.default_rng(2)
    s = np.round(rng.standard_normal(200), 1)  # plenty of ties
    y = (rng.random(200) < 0.4).astype(float)
    assert c_statistic(s, y) == pytest.approx(c_statistic_pairs(s, y), abs=1e-12)


def test_c_statistic_single_class():
    with pytest.raises(UndefinedMetricError):
        c_statistic(np.arange(4.0), np.ones(4))


@settings(max_examples=60, deadline=None)
@given(arrays(np.int64, 30, elements=st.integers(-40, 40)), st.integers(0, 2**31))
def test_c_statistic_monotone_invariance(grid, seed):
    scores = grid / 8.0  # coarse grid keeps the transform strictly monotone in floating point
    y = np.random.default_rng(seed).permutation(np.r_[np.ones(10), np.zeros(20)])
    assert c_statistic(scores, y) == pytest.approx(c_statistic(np.exp(scores) * 3 + 1, y), abs=1e-12)
    assert c_statistic(scores, y) == pytest.approx(c_statistic_pairs(scores, y), abs=1e-12)


def test_calibration_slope_self_calibrated(self_calibrated):
    lp, y = self_calibrated
    assert abs(calibration_slope(lp, y) - 1.0) < 0.02
    assert abs(calibration_slope(2 * lp, y) - 0.5) < 0.01


@pytest.mark.parametrize("k", [2.0, -0.5, 3.7])
def test_calibration_slope_reparametrization(self_calibrated, k):
    lp, y = self_calibrated
    assert calibration_slope(k * lp, y) == pytest.approx(calibration_slope(lp, y) / k, rel=1e-8)


def test_calibration_slope_constant_lp():
    with pytest.raises(UndefinedMetricError):
        calibration_slope(np.ones(10), np.r_[np.zeros(5), np.ones(5)])


def test_overfitted_models_have_slope_below_one():
    truth = np.array([0.2, 0.2, 0.2, 0.5, 0.8])
    rng = np.random.default_rng(3)
    Xv = rng.standard_normal((20_000, 5))
    val = Dataset(Xv, (rng.random(20_000) < expit(-1.4 + Xv @ truth)).astype(float))
    below = 0
    for _ in range(40):
        X = rng.standard_normal((60, 5))
        y = (rng.random(60) < expit(-1.4 + X @ truth)).astype(float)
        below += slope_for_run(fit_ml(Dataset(X, y)), val) < 1
    assert below >= 30


def test_slope_for_run_conventions():
    val = Dataset(np.random.default_rng(4).standard_normal((20, 2)), np.r_[np.zeros(10), np.ones(10)])
    assert slope_for_run(_fit([0.0, 0.0], 0.3), val) == NO_SELECTION_SLOPE
    lp_fit = _fit([1.0, -1.0])
    assert slope_for_run(lp_fit, val) == calibration_slope(val.X @ lp_fit.betas, val.y)


def test_aggregate_basic():
    s = aggregate_slopes(np.ones(7))
    assert (s.median, s.mad_log, s.rmsd_log) == (1.0, 0.0, 0.0)
    assert aggregate_slopes([0.5, 2.0]).rmsd_log == pytest.approx(np.log(2), abs=1e-15)


def test_winsorization_floor():
    assert winsorize([-0.3])[0] == 0.01
    s = aggregate_slopes([-0.3])
    assert s.median == -0.3
    assert s.rmsd_log == pytest.approx(-np.log(0.01))


def test_percentiles_are_type7():
    s = aggregate_slopes(np.arange(1.0, 11.0))
    assert s.p5 == pytest.approx(1.45) and s.p95 == pytest.approx(9.55) and s.median == 5.5


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.integers(1, 40), elements=st.floats(-1, 20)), st.integers(0, 2**31))
def test_aggregate_properties(slopes, seed):
    a = aggregate_slopes(slopes)
    b = aggregate_slopes(np.random.default_rng(seed).permutation(slopes))
    assert a == b  # exact, not approximate
    assert a.p5 <= a.median <= a.p95
    logs = np.log(winsorize(slopes))
    assert a.rmsd_log**2 == pytest.approx(logs.mean() ** 2 + logs.var(), abs=1e-12)


def test_shrinkage_correlation_cases():
    ml = np.array([0.5, 0.8, 1.1, 0.7])
    assert shrinkage_correlation(ml, ml) is None
    assert shrinkage_correlation(np.ones(4), ml) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        shrinkage_correlation(ml, ml[:3])


def test_shrinkage_correlation_uses_winsorized_logs():
    ml = np.array([0.2, 0.5, 0.9, 1.3, 0.7])
    m = np.array([-1.0, 0.6, 1.0, 0.9, 0.8])
    from scipy.stats import spearmanr

    lm = np.log(np.maximum(ml, 0.01))
    ref = spearmanr(np.log(np.maximum(m, 0.01)) - lm, -lm).statistic
    assert shrinkage_correlation(m, ml) == pytest.approx(ref)


def test_coefficient_bias_truth():
    model = TrueModel(np.array([0.5, -0.3, 0.0]), 0.0, 0.0)
    out = coefficient_bias([_fit(model.betas)] * 3, model)
    assert out == {"mean_bias_true": 0.0, "mean_bias_noise": 0.0}
    away = coefficient_bias([_fit([0.7, -0.5, 0.1])], model)
    assert away["mean_bias_true"] == pytest.approx(0.2)
    assert away["mean_bias_noise"] == pytest.approx(0.1)


def test_ml_bias_away_from_zero_and_firth_smaller():
    truth = np.array([0.2, 0.2, 0.2, 0.5, 0.8])
    model = TrueModel(truth, -2.57, 0.0)
    rng = np.random.default_rng(6)
    ml_fits, firth_fits = [], []
    while len(ml_fits) < 300:
        X = rng.standard_normal((150, 5))
        y = (rng.random(150) < expit(-2.57 + X @ truth)).astype(float)
        if y.sum() < 2:
            continue
        d = Dataset(X, y)
        ml = fit_ml(d)
        if ml.separation_detected:
            continue
        ml_fits.append(ml)
        firth_fits.append(fit_firth(d))
    b_ml = coefficient_bias(ml_fits, model)["mean_bias_true"]
    b_firth = coefficient_bias(firth_fits, model)["mean_bias_true"]
    assert b_ml > 0
    assert abs(b_firth) < abs(b_ml)


def test_selection_stats():
    model = TrueModel(np.array([0.5, 0.5, 0.0, 0.0]), 0.0, 0.0)
    zero = selection_stats([_fit(np.zeros(4))] * 2, model)
    assert zero == {"mean_n_selected": 0.0, "mean_n_noise_selected": 0.0}
    full = selection_stats([_fit([0.1, 0.2, -0.1, 0.3])], model)
    assert full == {"mean_n_selected": 4.0, "mean_n_noise_selected": 2.0}
