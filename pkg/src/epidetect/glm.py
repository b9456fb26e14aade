"""(Quasi-)Poisson log-linear regression by IRLS plus the distribution
quantiles and delta-method prediction intervals the detectors rely on.

The IRLS fit is written out explicitly (it is the numerical core of the
threshold computations and is cross-checked against independent oracles in
the tests); the classical distribution quantiles are delegated to scipy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

EULER_GAMMA = 0.5772156649015329

#: mean floor used for an all-zero response instead of a -inf intercept
ZERO_PROTECTION_MEAN = 1e-8

_MAX_ITER = 25
_DEVIANCE_RTOL = 1e-8
_ETA_CLIP = 30.0  # keeps exp() finite while IRLS is still far from the optimum


@dataclass(frozen=True)
class GlmFit:
    """Result of a quasi-Poisson fit.

    ``dispersion`` is the Pearson estimate clamped below at 1 (a plain
    Poisson model is used when the data are under-dispersed);
    ``dispersion_raw`` keeps the unclamped value for diagnostics.
    """

    coefficients: np.ndarray
    covariance: np.ndarray
    dispersion: float
    weights: np.ndarray
    converged: bool
    deviance: float
    n_obs: int
    dispersion_raw: float
    degenerate: bool = False

    @property
    def n_params(self) -> int:
        return int(self.coefficients.size)

    def linear_predictor(self, x: Sequence[float]) -> float:
        return float(np.asarray(x, dtype=float) @ self.coefficients)

    def mean_at(self, x: Sequence[float]) -> float:
        return math.exp(self.linear_predictor(x))


@dataclass(frozen=True)
class PredictiveInterval:
    """One-sided upper prediction limit for a future count."""

    mean: float
    upper: float
    scale: str
    alpha: float

    def __post_init__(self):
        if self.alpha < 0.5 and self.upper < self.mean - 1e-12:
            raise ValueError("upper limit below the predicted mean")


def poisson_deviance(y: np.ndarray, mu: np.ndarray, w: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        ylogy = np.where(y > 0, y * np.log(y / mu), 0.0)
    return float(2.0 * np.sum(w * (ylogy - (y - mu))))


def fit_quasipoisson(design, response, weights=None, *,
                     max_iter: int = _MAX_ITER,
                     tol: float = _DEVIANCE_RTOL) -> GlmFit:
    """Fit a log-link (quasi-)Poisson GLM by IRLS.

    Starts at beta0 = log(mean(y) + 0.5) with all other coefficients zero and
    stops when the relative deviance change drops below ``tol``. A response
    that is identically zero yields a degenerate intercept-only fit at the
    zero-protection floor instead of a -inf intercept.
    """
    X = np.atleast_2d(np.asarray(design, dtype=float))
    if X.shape[0] == 1 and X.shape[1] > 1 and np.asarray(response).size > 1:
        X = X.T
    y = np.asarray(response, dtype=float)
    n, p = X.shape
    if y.shape != (n,):
        raise ValueError("response length must match design rows")
    if np.any(y < 0):
        raise ValueError("counts must be non-negative")
    if n < p + 1:
        raise ValueError(f"need at least {p + 1} rows to fit {p} coefficients")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w < 0):
        raise ValueError("weights must be non-negative, one per row")

    if y.sum() == 0:
        beta = np.zeros(p)
        beta[0] = math.log(ZERO_PROTECTION_MEAN)
        return GlmFit(coefficients=beta, covariance=np.zeros((p, p)),
                      dispersion=1.0, weights=w, converged=True, deviance=0.0,
                      n_obs=n, dispersion_raw=1.0, degenerate=True)

    beta = np.zeros(p)
    beta[0] = math.log(np.average(y, weights=w) + 0.5)
    eta = np.clip(X @ beta, -_ETA_CLIP, _ETA_CLIP)
    mu = np.exp(eta)
    dev = poisson_deviance(y, mu, w)
    converged = False
    try:
        for _ in range(max_iter):
            irls_w = w * mu
            z = eta + (y - mu) / mu
            WX = X * irls_w[:, None]
            beta = np.linalg.solve(X.T @ WX, WX.T @ z)
            eta = np.clip(X @ beta, -_ETA_CLIP, _ETA_CLIP)
            mu = np.exp(eta)
            dev_new = poisson_deviance(y, mu, w)
            if abs(dev_new - dev) / (abs(dev_new) + 0.1) < tol:
                dev = dev_new
                converged = True
                break
            dev = dev_new

        pearson = float(np.sum(w * (y - mu) ** 2 / mu))
        dof = max(n - p, 1)
        phi_raw = pearson / dof
        phi = max(1.0, phi_raw)
        info = X.T @ (X * (w * mu)[:, None])
        covariance = phi * np.linalg.inv(info)
    except np.linalg.LinAlgError:
        raise ValueError("singular design matrix (collinear columns); "
                         "drop redundant covariates") from None
    return GlmFit(coefficients=beta, covariance=covariance, dispersion=phi,
                  weights=w, converged=converged, deviance=dev, n_obs=n,
                  dispersion_raw=phi_raw)


_POWER_BY_SCALE = {"sqrt": 0.5, "two-thirds": 2.0 / 3.0}


def predict_upper(fit: GlmFit, x, alpha: float,
                  scale: str = "identity") -> PredictiveInterval:
    """Upper limit of the one-sided (1-alpha) prediction interval at x.

    The variance of the prediction error is phi*mu + V(mu_hat), with
    V(mu_hat) = exp(eta)^2 * x' Cov(beta) x by the delta method. Power scales
    apply the same delta method to g(y) = y^p and back-transform the limit;
    the negbin-quantile scale returns the exact discrete quantile of
    NegBin(mean=mu, dispersion=mu/(phi-1)), falling back to the Poisson
    quantile when phi = 1.
    """
    if not 0.0 < alpha <= 0.5:
        raise ValueError("alpha must be in (0, 0.5]")
    if not fit.converged and not fit.degenerate:
        raise ValueError("fit did not converge; refusing to predict")
    x = np.asarray(x, dtype=float)
    eta = float(x @ fit.coefficients)
    mu = math.exp(eta)
    var_eta = float(x @ fit.covariance @ x)
    var_mu = (mu ** 2) * var_eta
    phi = fit.dispersion
    pred_var = phi * mu + var_mu

    if scale == "identity":
        z = normal_quantile(1.0 - alpha)
        upper = mu + z * math.sqrt(pred_var)
    elif scale in _POWER_BY_SCALE:
        z = normal_quantile(1.0 - alpha)
        p = _POWER_BY_SCALE[scale]
        var_trans = (p ** 2) * mu ** (2.0 * p - 2.0) * pred_var
        upper = (mu ** p + z * math.sqrt(var_trans)) ** (1.0 / p)
    elif scale == "negbin-quantile":
        if phi > 1.0:
            upper = float(negbin_quantile(mu, mu / (phi - 1.0), 1.0 - alpha))
        else:
            upper = float(poisson_quantile(mu, 1.0 - alpha))
    else:
        raise ValueError(f"unknown scale {scale!r}")
    return PredictiveInterval(mean=mu, upper=upper, scale=scale, alpha=alpha)


# ---------------------------------------------------------------------------
# Quantiles and tail probabilities
# ---------------------------------------------------------------------------

def poisson_quantile(lam: float, p: float) -> int:
    """Smallest k with P(Poisson(lam) <= k) >= p."""
    _check_prob(p)
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if lam == 0:
        return 0
    return int(stats.poisson.ppf(p, lam))


def poisson_sf(lam: float, k: float) -> float:
    """P(Poisson(lam) > k)."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    return float(stats.poisson.sf(k, lam))


def negbin_quantile(mean: float, dispersion: float, p: float) -> int:
    """Quantile of NegBin(mean, dispersion): variance = mean + mean^2/dispersion."""
    _check_prob(p)
    if mean < 0 or dispersion <= 0:
        raise ValueError("need mean >= 0 and dispersion > 0")
    if mean == 0:
        return 0
    prob = dispersion / (dispersion + mean)
    return int(stats.nbinom.ppf(p, dispersion, prob))


def student_t_quantile(df: float, p: float) -> float:
    _check_prob(p)
    if df <= 0:
        raise ValueError("df must be > 0")
    return float(stats.t.ppf(p, df))


def student_t_sf(df: float, x: float) -> float:
    if df <= 0:
        raise ValueError("df must be > 0")
    return float(stats.t.sf(x, df))


def normal_quantile(p: float) -> float:
    _check_prob(p)
    return float(stats.norm.ppf(p))


def f_quantile(d1: float, d2: float, p: float) -> float:
    _check_prob(p)
    if d1 <= 0 or d2 <= 0:
        raise ValueError("degrees of freedom must be > 0")
    return float(stats.f.ppf(p, d1, d2))


def gumbel_fit(samples) -> tuple[float, float]:
    """Method-of-moments Gumbel fit: scale = sd*sqrt(6)/pi, loc = mean - gamma*scale."""
    arr = np.asarray(samples, dtype=float)
    if arr.size < 2:
        raise ValueError("need at least two samples")
    sd = float(arr.std(ddof=1))
    if sd == 0:
        raise ValueError("samples are constant; Gumbel fit undefined")
    scale = sd * math.sqrt(6.0) / math.pi
    loc = float(arr.mean()) - EULER_GAMMA * scale
    return loc, scale


def gumbel_sf(x: float, loc: float, scale: float) -> float:
    """Gumbel upper tail P(X > x), computed as -expm1(-exp(-(x-loc)/scale))."""
    if scale <= 0:
        raise ValueError("scale must be > 0")
    return float(-math.expm1(-math.exp(-(x - loc) / scale)))


def gumbel_fit_and_sf(samples, x: float) -> float:
    loc, scale = gumbel_fit(samples)
    return gumbel_sf(x, loc, scale)


def _check_prob(p: float) -> None:
    if not 0.0 < p < 1.0:
        raise ValueError("probability must be in (0, 1)")
