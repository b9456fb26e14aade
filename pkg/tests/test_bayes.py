import math

import numpy as np
import pytest

from epidetect.bayes import (GammaPrior, OutbreakPriors, bayes_scan,
                             elicit_window_prior, negbin_log_marginal)
from epidetect.zones import SpaceTimeWindow, Zone, windows

import oracles


def test_marginal_zero_count():
    prior = GammaPrior(2.5, 1.5)
    got = negbin_log_marginal(0, 3.0, prior)
    assert got == pytest.approx(2.5 * math.log(1.5 / 4.5), rel=1e-12)


def test_marginal_hand_value_quarter():
    # alpha=1, beta=1, B=1, Y=1 -> Gamma(2)/(1!*Gamma(1)) * (1/2) * (1/2) = 1/4
    got = math.exp(negbin_log_marginal(1, 1.0, GammaPrior(1.0, 1.0)))
    assert got == pytest.approx(0.25, rel=1e-12)
    quad = oracles.quadrature_marginal(1, 1.0, 1.0, 1.0)
    assert got == pytest.approx(quad, rel=1e-8)


def test_marginal_sums_to_one():
    rng = np.random.default_rng(5)
    for _ in range(5):
        a = rng.uniform(0.3, 8.0)
        r = rng.uniform(0.3, 4.0)
        b = rng.uniform(0.5, 6.0)
        total = sum(math.exp(negbin_log_marginal(y, b, GammaPrior(a, r)))
                    for y in range(4000))
        assert total == pytest.approx(1.0, abs=1e-9)


def test_marginal_validates_inputs():
    with pytest.raises(ValueError):
        negbin_log_marginal(-1, 1.0, GammaPrior(1, 1))
    with pytest.raises(ValueError):
        negbin_log_marginal(1, 0.0, GammaPrior(1, 1))
    with pytest.raises(ValueError):
        GammaPrior(0.0, 1.0)


def test_elicit_window_prior():
    wins = windows([Zone((0,)), Zone((1,))], 2)
    weights = elicit_window_prior(wins, 0.2)
    assert np.allclose(weights, 0.05)
    assert weights.sum() == pytest.approx(0.2)
    assert elicit_window_prior(wins[:1], 0.3).tolist() == [0.3]


def _toy_inputs(counts, d_max=1):
    counts = np.asarray(counts)
    n = counts.shape[0]
    zones = [Zone((i,)) for i in range(n)]
    return windows(zones, d_max)


def test_p_h1_zero_gives_null_posterior_one():
    counts = np.array([[30, 40], [2, 2]])
    b = np.ones((2, 2))
    wins = _toy_inputs(counts, 2)
    result, rec = bayes_scan(counts, b, wins, OutbreakPriors(p_h1=0.0))
    assert result.null_posterior == pytest.approx(1.0, abs=1e-12)
    assert not rec.alarm


def test_symmetric_windows_equal_posteriors():
    counts = np.array([[6, 6], [6, 6]])
    b = np.ones((2, 2))
    wins = [SpaceTimeWindow(Zone((0,)), 1), SpaceTimeWindow(Zone((1,)), 1)]
    result, _ = bayes_scan(counts, b, wins, OutbreakPriors(p_h1=0.01))
    assert result.window_posteriors[0] == pytest.approx(
        result.window_posteriors[1], rel=1e-12)


def test_posterior_normalization():
    rng = np.random.default_rng(3)
    for _ in range(10):
        counts = rng.poisson(3.0, (4, 3))
        b = rng.uniform(0.5, 3.0, (4, 3))
        wins = _toy_inputs(counts, 3)
        result, _ = bayes_scan(counts, b, wins, OutbreakPriors(p_h1=1e-4))
        total = result.null_posterior + result.window_posteriors.sum()
        assert abs(total - 1.0) < 1e-9


def test_quadrature_oracle_agreement_single_window():
    priors = OutbreakPriors(p_h1=1e-3)
    counts = np.array([[14], [3]])
    b = np.array([[2.0], [3.0]])
    wins = [SpaceTimeWindow(Zone((0,)), 1)]
    result, _ = bayes_scan(counts, b, wins, priors)
    want_h1, want_h0 = oracles.quadrature_posteriors(
        14, 2.0, 3, 3.0, priors)
    assert result.window_posteriors[0] == pytest.approx(want_h1, abs=1e-6)
    assert result.null_posterior == pytest.approx(want_h0, abs=1e-6)


def test_monotone_in_window_count():
    # growing Y_W with everything else fixed never lowers the window posterior
    priors = OutbreakPriors(p_h1=1e-3)
    wins = [SpaceTimeWindow(Zone((0,)), 1)]
    b = np.array([[2.0], [3.0]])
    posts = []
    for y_in in range(0, 25, 4):
        counts = np.array([[y_in], [3]])
        result, _ = bayes_scan(counts, b, wins, priors)
        posts.append(result.window_posteriors[0])
    assert all(p2 >= p1 - 1e-12 for p1, p2 in zip(posts, posts[1:]))


def test_sequential_grid_update_conserves_normalization():
    rng = np.random.default_rng(7)
    priors = OutbreakPriors(p_h1=1e-4)
    counts0 = rng.poisson(3.0, (3, 2))
    b = np.ones((3, 2))
    wins = _toy_inputs(counts0, 2)
    for step in range(4):
        counts = rng.poisson(3.0, (3, 2))
        result, _ = bayes_scan(counts, b, wins, priors)
        priors = result.updated_priors
        assert priors.alpha_w_weights.sum() == pytest.approx(1.0, abs=1e-9)
    # outbreak data shifts grid mass upward relative to the uniform start
    hot = np.array([[40, 50], [3, 3], [3, 3]])
    result, _ = bayes_scan(hot, b, wins, OutbreakPriors(p_h1=1e-4))
    up = result.updated_priors.alpha_w_weights
    grid = result.updated_priors.alpha_w_values
    assert (up * grid).sum() > grid.mean()


def test_alarm_uses_reporting_threshold():
    counts = np.array([[80, 90], [2, 2]])
    b = np.ones((2, 2)) * 2.0
    wins = _toy_inputs(counts, 2)
    result, rec = bayes_scan(counts, b, wins,
                             OutbreakPriors(p_h1=0.01,
                                            reporting_threshold=0.5))
    assert rec.alarm == (rec.statistic_value > 0.5)
    assert rec.detail["top_windows"][0]["posterior"] == pytest.approx(
        max(result.window_posteriors))


def test_needs_positive_baselines():
    counts = np.array([[1, 2]])
    b = np.array([[1.0, 0.0]])
    with pytest.raises(ValueError, match="positive baselines"):
        bayes_scan(counts, b, _toy_inputs(counts, 1), OutbreakPriors())
