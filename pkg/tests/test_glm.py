import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epidetect.glm import (ZERO_PROTECTION_MEAN, fit_quasipoisson,
                           f_quantile, gumbel_fit, gumbel_fit_and_sf,
                           gumbel_sf, negbin_quantile, normal_quantile,
                           poisson_quantile, poisson_sf, predict_upper,
                           student_t_quantile, student_t_sf)

import oracles


def test_intercept_only_constant_response():
    fit = fit_quasipoisson(np.ones((3, 1)), [3, 3, 3])
    assert fit.mean_at([1.0]) == pytest.approx(3.0, rel=1e-10)
    assert fit.coefficients[0] == pytest.approx(math.log(3.0), rel=1e-10)
    assert fit.dispersion == 1.0
    assert fit.converged


def test_trend_fit_matches_newton_oracle_and_truth():
    rng = np.random.default_rng(42)
    s = np.arange(60, dtype=float)
    mu = np.exp(1.0 + 0.02 * s)
    y = rng.poisson(mu)
    X = np.column_stack([np.ones_like(s), s])
    fit = fit_quasipoisson(X, y)
    oracle_beta = oracles.newton_poisson_fit(X, y)
    assert np.allclose(fit.coefficients, oracle_beta, atol=1e-7)
    se = np.sqrt(np.diag(fit.covariance))
    assert abs(fit.coefficients[0] - 1.0) < 3 * se[0]
    assert abs(fit.coefficients[1] - 0.02) < 3 * se[1]


def test_uniform_weights_leave_beta_fixed_and_halve_dispersion():
    rng = np.random.default_rng(5)
    s = np.arange(30, dtype=float)
    y = rng.poisson(np.exp(1.2 + 0.03 * s)) * rng.integers(1, 4, size=30)
    X = np.column_stack([np.ones_like(s), s])
    full = fit_quasipoisson(X, y, np.ones(30))
    half = fit_quasipoisson(X, y, np.full(30, 0.5))
    assert np.allclose(full.coefficients, half.coefficients, atol=1e-9)
    assert half.dispersion_raw == pytest.approx(full.dispersion_raw / 2, rel=1e-9)
    # grid-refinement oracle agrees on the optimum of the weighted likelihood
    oracle = oracles.grid_refine_fit(X, y.astype(float), np.full(30, 0.5),
                                     lo=(0.0, -0.1), hi=(3.0, 0.1))
    assert np.allclose(half.coefficients, oracle, atol=1e-4)


def test_all_zero_response_degenerate():
    fit = fit_quasipoisson(np.ones((4, 1)), [0, 0, 0, 0])
    assert fit.degenerate
    assert fit.mean_at([1.0]) == pytest.approx(ZERO_PROTECTION_MEAN)
    assert fit.dispersion == 1.0


def test_score_vanishes_at_convergence():
    rng = np.random.default_rng(9)
    for _ in range(10):
        n = rng.integers(8, 25)
        X = np.column_stack([np.ones(n), rng.normal(0, 0.5, n)])
        y = rng.poisson(np.exp(0.5 + 0.3 * X[:, 1]))
        if y.sum() == 0:
            continue
        w = rng.uniform(0.5, 1.5, n)
        fit = fit_quasipoisson(X, y, w)
        assert fit.converged
        score = oracles.poisson_score(fit.coefficients, X, y.astype(float), w)
        assert np.max(np.abs(score)) < 1e-6


def test_analytic_gradient_matches_finite_differences():
    rng = np.random.default_rng(17)
    for _ in range(5):
        n = 12
        X = np.column_stack([np.ones(n), rng.normal(0, 0.4, n)])
        y = rng.poisson(3.0, n).astype(float)
        w = np.ones(n)
        beta = rng.normal(0, 0.3, 2)
        grad = oracles.poisson_score(beta, X, y, w)
        h = 1e-6
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            fd = (oracles.poisson_loglik(beta + e, X, y, w)
                  - oracles.poisson_loglik(beta - e, X, y, w)) / (2 * h)
            assert grad[j] == pytest.approx(fd, rel=1e-6, abs=1e-6)


def test_needs_more_rows_than_coefficients():
    with pytest.raises(ValueError):
        fit_quasipoisson(np.ones((2, 2)), [1, 2])


def test_singular_design_rejected_with_message():
    X = np.column_stack([np.ones(6), np.ones(6)])  # collinear columns
    with pytest.raises(ValueError, match="singular design"):
        fit_quasipoisson(X, [1, 2, 3, 1, 2, 3])


# ---------------------------------------------------------------------------
# predict_upper
# ---------------------------------------------------------------------------

def _flat_fit(mu, phi=1.0, var_eta=0.0):
    from epidetect.glm import GlmFit
    return GlmFit(coefficients=np.array([math.log(mu)]),
                  covariance=np.array([[var_eta]]), dispersion=phi,
                  weights=np.ones(3), converged=True, deviance=0.0, n_obs=3,
                  dispersion_raw=phi)


def test_predict_upper_zero_covariance_formula():
    fit = _flat_fit(4.0)
    alpha = 1.0 - 0.9986501019683699  # z = 3
    out = predict_upper(fit, [1.0], alpha)
    assert out.upper == pytest.approx(10.0, rel=1e-9)


def test_predict_upper_negbin_poisson_fallback():
    fit = _flat_fit(7.1)
    out = predict_upper(fit, [1.0], 0.00135, scale="negbin-quantile")
    assert out.upper == 16


def test_predict_upper_rejects_bad_alpha():
    fit = _flat_fit(4.0)
    for alpha in (0.0, -0.1, 0.6, 1.0):
        with pytest.raises(ValueError):
            predict_upper(fit, [1.0], alpha)


@pytest.mark.parametrize("scale", ["identity", "sqrt", "two-thirds",
                                   "negbin-quantile"])
def test_predict_upper_monotone_in_alpha(scale):
    fit = _flat_fit(6.0, phi=1.8, var_eta=0.01)
    alphas = [0.001, 0.01, 0.05, 0.1, 0.3]
    uppers = [predict_upper(fit, [1.0], a, scale).upper for a in alphas]
    assert all(u1 >= u2 - 1e-12 for u1, u2 in zip(uppers, uppers[1:]))


# ---------------------------------------------------------------------------
# distribution quantiles / tails
# ---------------------------------------------------------------------------

def test_t_survival_of_three_sd_rule():
    value = student_t_sf(6, 3.0 / math.sqrt(1.0 + 1.0 / 7.0))
    assert value == pytest.approx(0.0155, abs=2e-4)


def test_poisson_survivor_and_quantiles_vs_summation():
    lam = 50.0 / 7.0
    assert poisson_sf(lam, 14) == pytest.approx(0.00681, abs=5e-5)
    assert poisson_sf(lam, 14) == pytest.approx(
        oracles.poisson_tail_by_summation(lam, 14), rel=1e-9)
    assert poisson_quantile(7.1, 0.99865) == 16

    lam_q = 12.0 / 7.0
    assert poisson_sf(lam_q, 3) == pytest.approx(0.0953, abs=5e-4)
    assert poisson_sf(lam_q, 3) == pytest.approx(
        oracles.poisson_tail_by_summation(lam_q, 3), rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.1, 40.0), st.floats(0.01, 0.99))
def test_discrete_quantile_survivor_consistency(lam, p):
    k = poisson_quantile(lam, p)
    assert poisson_sf(lam, k) <= 1.0 - p + 1e-12
    if k >= 1:
        assert poisson_sf(lam, k - 1) > 1.0 - p - 1e-12


def test_negbin_quantile_matches_variance_parametrization():
    # dispersion -> inf recovers the Poisson quantile
    assert negbin_quantile(7.1, 1e9, 0.99865) == poisson_quantile(7.1, 0.99865)
    # heavier tail than Poisson for finite dispersion
    assert negbin_quantile(7.1, 2.0, 0.99865) > 16


def test_continuous_quantiles_reference_values():
    assert normal_quantile(0.975) == pytest.approx(1.959964, abs=1e-6)
    assert student_t_quantile(6, 0.95) == pytest.approx(1.943180, abs=1e-6)
    assert f_quantile(3, 10, 0.95) == pytest.approx(3.708265, abs=1e-5)


def test_gumbel_fit_and_sf():
    rng = np.random.default_rng(1)
    samples = rng.gumbel(loc=2.0, scale=0.7, size=20000)
    loc, scale = gumbel_fit(samples)
    assert loc == pytest.approx(2.0, abs=0.05)
    assert scale == pytest.approx(0.7, abs=0.05)
    # survivor at the fitted mean is the universal Gumbel constant
    p = gumbel_fit_and_sf(samples, float(np.mean(samples)))
    assert 0.40 <= p <= 0.45
    assert gumbel_sf(1e9, loc, scale) == pytest.approx(0.0, abs=1e-12)
