import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epidetect.data import CountSeries
from epidetect.glm import fit_quasipoisson, predict_upper
from epidetect.univariate import (EarsConfig, FarringtonConfig,
                                  HarmonicModelConfig, ears, farrington,
                                  harmonic_mean_model, stroup_history)

import oracles

# integer history with mean 50/7 ~ 7.1 and sd ~ 2.61, matching the published
# EARS / Farrington comparison scenario
COMPARISON_HISTORY = [4, 5, 6, 6, 8, 10, 11]


def _series_with_history(history, current, period=12):
    """Series where `history` fills the b=1 window around t - period and
    `current` sits at t = period + half-window."""
    w = (len(history) - 1) // 2
    t = period + w
    vals = np.zeros(t + 1, dtype=int)
    vals[: len(history)] = history
    vals[t] = current
    return CountSeries(vals, period_length=period), t


def test_ears_multiplier_reference_value():
    vals = np.array(COMPARISON_HISTORY + [13])
    series = CountSeries(vals, period_length=12)
    rec = ears(series, 7, EarsConfig(k=7))
    assert round(rec.threshold, 1) == 15.0
    assert not rec.alarm
    assert rec.detail["mean"] == pytest.approx(50.0 / 7.0)


def test_ears_t_quantile_reference_value():
    vals = np.array(COMPARISON_HISTORY + [13])
    series = CountSeries(vals, period_length=12)
    alpha = 1.0 - 0.9986501019683699  # alpha = 1 - Phi(3)
    rec = ears(series, 7, EarsConfig(k=7, alpha=alpha))
    assert rec.threshold == pytest.approx(20.8, abs=0.05)


def test_ears_degenerate_constant_history():
    series = CountSeries(np.array([5] * 7 + [5]))
    rec = ears(series, 7, EarsConfig(k=7))
    assert rec.detail["degenerate"]
    assert not rec.alarm
    series2 = CountSeries(np.array([5] * 7 + [6]))
    assert ears(series2, 7, EarsConfig(k=7)).alarm


def test_ears_quartered_history_threshold():
    series = CountSeries(np.array([1, 1, 2, 2, 2, 2, 2, 4]))
    rec = ears(series, 7, EarsConfig(k=7))
    assert round(rec.threshold, 2) == 3.18
    assert rec.alarm  # 4 > 3.18


def test_ears_needs_enough_history():
    series = CountSeries(np.arange(1, 6))
    with pytest.raises(ValueError):
        ears(series, 4, EarsConfig(k=7))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 30), min_size=8, max_size=8),
       st.floats(0.25, 8.0))
def test_ears_scale_equivariance(values, a):
    # real-valued pathway: thresholds scale linearly, the decision is invariant
    vals = np.array(values)
    if vals[:7].std(ddof=1) == 0:
        return
    series = CountSeries(vals)
    rec = ears(series, 7)
    hist = vals[:7] * a
    mean, sd = hist.mean(), hist.std(ddof=1)
    scaled_threshold = mean + 3.0 * sd
    assert scaled_threshold == pytest.approx(a * rec.threshold, rel=1e-9)
    assert (vals[7] * a > scaled_threshold) == rec.alarm


def test_stroup_history_weekly_example():
    # week 45 of year 3 (0-based index 2*52 + 44), half-window 2
    series = CountSeries(np.zeros(3 * 52, dtype=int), period_length=52)
    t = 2 * 52 + 44
    idx = stroup_history(series, t, 2)
    want = sorted([y * 52 + w for y in (0, 1) for w in range(42, 47)])
    assert idx == want


def test_stroup_half_window_zero():
    series = CountSeries(np.zeros(30, dtype=int), period_length=10)
    assert stroup_history(series, 25, 0) == [5, 15]


def test_stroup_empty_errors():
    series = CountSeries(np.zeros(10, dtype=int), period_length=12)
    with pytest.raises(ValueError):
        stroup_history(series, 5, 1)


# ---------------------------------------------------------------------------
# Farrington
# ---------------------------------------------------------------------------

def test_farrington_b1_comparison_values():
    series, t = _series_with_history(COMPARISON_HISTORY, 13)
    # history occupies t-12-3 .. t-12+3
    assert t - 12 - 3 == 0 and t == 15
    for scale, want, tol in [("identity", 15.7, 0.05), ("two-thirds", 17.2, 0.06),
                             ("negbin-quantile", 16, 0)]:
        rec = farrington(series, t,
                         FarringtonConfig(b=1, w=3, alpha=0.00135, scale=scale))
        assert rec.threshold == pytest.approx(want, abs=tol + 1e-9)
        assert not rec.alarm


def test_farrington_constant_history_mean():
    vals = np.full(40, 6, dtype=int)
    series = CountSeries(vals, period_length=12)
    rec = farrington(series, 39, FarringtonConfig(b=3, w=1, alpha=0.01))
    assert rec.detail["mu_hat"] == pytest.approx(6.0, rel=1e-8)


def test_farrington_degenerate_all_zero_history():
    vals = np.zeros(30, dtype=int)
    series = CountSeries(vals, period_length=12)
    rec = farrington(series, 29, FarringtonConfig(b=2, w=1))
    assert not rec.alarm and rec.detail["degenerate"]
    vals2 = vals.copy()
    vals2[29] = 1
    rec2 = farrington(CountSeries(vals2, period_length=12), 29,
                      FarringtonConfig(b=2, w=1))
    assert rec2.alarm


def test_farrington_threshold_monotone_in_alpha():
    rng = np.random.default_rng(23)
    vals = rng.poisson(8, 40)
    series = CountSeries(vals, period_length=12)
    uppers = [farrington(series, 39, FarringtonConfig(b=3, w=1, alpha=a)).threshold
              for a in (0.001, 0.01, 0.05, 0.2)]
    assert all(u1 >= u2 - 1e-12 for u1, u2 in zip(uppers, uppers[1:]))


def test_farrington_flat_history_equals_intercept_predict_upper():
    rng = np.random.default_rng(4)
    vals = rng.poisson(5, 40)
    series = CountSeries(vals, period_length=12)
    config = FarringtonConfig(b=3, w=1, alpha=0.01, trend_rules_enabled=False)
    rec = farrington(series, 39, config)
    idx = [39 - 12 * i + j for i in (1, 2, 3) for j in (-1, 0, 1)]
    fit = fit_quasipoisson(np.ones((9, 1)), vals[sorted(idx)].astype(float))
    want = predict_upper(fit, [1.0], 0.01).upper
    assert rec.threshold == pytest.approx(want, rel=1e-12)


def test_farrington_trend_rules():
    # consistent year-over-year growth whose historic maximum still covers
    # the extrapolated mean: trend kept with >= 3 usable years
    vals = np.zeros(60, dtype=int)
    vals[20:27] = [7, 8, 8, 9, 9, 10, 10]
    vals[32:39] = [10, 11, 11, 12, 12, 13, 13]
    vals[44:51] = [14, 15, 16, 17, 18, 19, 30]
    series = CountSeries(vals, period_length=12)
    rec = farrington(series, 59, FarringtonConfig(b=3, w=3, alpha=0.01))
    assert rec.detail["trend_included"]
    assert rec.detail["mu_hat"] <= 30
    # same data but only 2 years of history: trend disallowed
    rec2 = farrington(series, 59, FarringtonConfig(b=2, w=3, alpha=0.01))
    assert not rec2.detail["trend_included"]


def test_farrington_trend_overextrapolation_guard():
    # explosive trend ending far above the history maximum: trend dropped
    vals = np.concatenate([
        np.full(12, 2), np.full(12, 2), np.full(12, 2),
        [2, 2, 2, 4, 8, 16, 32, 64, 80, 90, 95, 99]]).astype(int)
    series = CountSeries(vals, period_length=12)
    rec = farrington(series, 47, FarringtonConfig(b=3, w=5, alpha=0.01))
    mu = rec.detail["mu_hat"]
    hist_max = 99  # over-extrapolation rule caps the usable mean
    assert rec.detail["trend_included"] is False or mu <= hist_max


def test_farrington_reweight_idempotent_on_clean_data():
    vals = np.full(40, 7, dtype=int)
    series = CountSeries(vals, period_length=12)
    clean = farrington(series, 39, FarringtonConfig(b=3, w=1, alpha=0.01,
                                                    reweight_enabled=True))
    plain = farrington(series, 39, FarringtonConfig(b=3, w=1, alpha=0.01))
    assert clean.threshold == pytest.approx(plain.threshold, rel=1e-12)
    assert clean.detail.get("reweighted") is False


def test_farrington_reweight_downweights_outbreak():
    vals = np.full(40, 5, dtype=int)
    vals[15] = 40  # past outbreak in one historic window
    series = CountSeries(vals, period_length=12)
    plain = farrington(series, 39, FarringtonConfig(b=3, w=2, alpha=0.01))
    rew = farrington(series, 39, FarringtonConfig(b=3, w=2, alpha=0.01,
                                                  reweight_enabled=True))
    assert rew.detail["mu_hat"] < plain.detail["mu_hat"]
    assert rew.threshold < plain.threshold


def test_farrington_requires_full_seasons():
    series = CountSeries(np.ones(20, dtype=int), period_length=12)
    with pytest.raises(ValueError):
        farrington(series, 10, FarringtonConfig(b=1, w=1))


def test_farrington_window_wider_than_period_disqualifies_year():
    # w >= P clips the single historic window below half its size
    series = CountSeries(np.ones(3, dtype=int), period_length=2)
    with pytest.raises(ValueError, match="disqualified"):
        farrington(series, 2, FarringtonConfig(b=1, w=3))


# ---------------------------------------------------------------------------
# harmonic mean model
# ---------------------------------------------------------------------------

def test_harmonic_constant_reduces_to_mean():
    vals = np.array([4, 6, 5, 4, 6, 5, 4, 6, 5, 4, 6, 5])
    series = CountSeries(vals, period_length=6)
    model = harmonic_mean_model(series, HarmonicModelConfig(0, include_trend=False))
    assert model.mean_at(3) == pytest.approx(vals.mean(), rel=1e-9)


def test_harmonic_recovers_seasonal_amplitude():
    rng = np.random.default_rng(31)
    t = np.arange(96, dtype=float)
    eta = 2.0 + 0.6 * np.sin(2 * np.pi * t / 12) + 0.3 * np.cos(2 * np.pi * t / 12)
    series = CountSeries(rng.poisson(np.exp(eta)).astype(int), period_length=12)
    model = harmonic_mean_model(series, HarmonicModelConfig(1, include_trend=False))
    X = np.vstack([model.design_row(tt) for tt in t])
    oracle = oracles.newton_poisson_fit(X, series.values.astype(float))
    assert np.allclose(model.fit.coefficients, oracle, atol=1e-7)
    se = np.sqrt(np.diag(model.fit.covariance))
    assert abs(model.fit.coefficients[1] - 0.6) < 3 * se[1]
    assert abs(model.fit.coefficients[2] - 0.3) < 3 * se[2]


def test_harmonic_wrong_period_fits_worse():
    rng = np.random.default_rng(13)
    t = np.arange(120, dtype=float)
    eta = 1.5 + 0.9 * np.sin(2 * np.pi * t / 12)
    vals = rng.poisson(np.exp(eta)).astype(int)
    good = harmonic_mean_model(CountSeries(vals, period_length=12),
                               HarmonicModelConfig(1, include_trend=False))
    bad = harmonic_mean_model(CountSeries(vals, period_length=7),
                              HarmonicModelConfig(1, include_trend=False))
    assert good.fit.deviance < bad.fit.deviance


def test_harmonic_needs_enough_observations():
    series = CountSeries(np.ones(5, dtype=int), period_length=12)
    with pytest.raises(ValueError):
        harmonic_mean_model(series, HarmonicModelConfig(2))
