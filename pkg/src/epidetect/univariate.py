"""EARS and Farrington detectors over a univariate count series.

Both methods predict the current count from historic values under a
no-outbreak assumption and alarm when the observation exceeds the upper
limit of a one-sided prediction interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import AlarmRecord, CountSeries
from .glm import (GlmFit, fit_quasipoisson, normal_quantile, predict_upper,
                  student_t_quantile)


@dataclass(frozen=True)
class EarsConfig:
    """EARS baseline: last k points; threshold mean + 3 sd, or a proper
    Gaussian prediction interval with a t quantile when alpha is set."""

    k: int = 7
    multiplier: float = 3.0
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("baseline length k must be >= 2")
        if self.alpha is not None and not 0.0 < self.alpha < 0.5:
            raise ValueError("alpha must be in (0, 0.5)")


@dataclass(frozen=True)
class FarringtonConfig:
    b: int = 3                      # years of history
    w: int = 3                      # half-window around the reference point
    alpha: float = 0.00135
    scale: str = "identity"         # identity | sqrt | two-thirds | negbin-quantile
    trend_rules_enabled: bool = True
    reweight_enabled: bool = False  # the simplified procedure; opt in for outliers

    def __post_init__(self):
        if self.b < 1 or self.w < 0:
            raise ValueError("need b >= 1 and w >= 0")
        if self.b * (2 * self.w + 1) < 3:
            raise ValueError("historic set b(2w+1) must be >= 3")
        if not 0.0 < self.alpha <= 0.5:
            raise ValueError("alpha must be in (0, 0.5]")


@dataclass(frozen=True)
class HarmonicModelConfig:
    n_harmonics: int = 1
    include_trend: bool = True

    def __post_init__(self):
        if self.n_harmonics < 0:
            raise ValueError("n_harmonics must be >= 0")


def ears(series: CountSeries, t: int, config: EarsConfig = EarsConfig()) -> AlarmRecord:
    """EARS decision at index t using the k immediately preceding points."""
    k = config.k
    if t < k:
        raise ValueError(f"need {k} history points before t={t}")
    if t >= len(series):
        raise IndexError(f"t={t} outside the series")
    hist = series.values[t - k:t].astype(float)
    y = float(series.values[t])
    mean = float(hist.mean())
    sd = float(hist.std(ddof=1))
    detail: dict = {"method": "ears", "mean": mean, "sd": sd, "k": k}
    if sd == 0.0:
        detail["degenerate"] = True
        threshold = mean
        alarm = y > mean
        detail["c_statistic"] = math.inf if y > mean else (0.0 if y == mean else -math.inf)
    else:
        detail["c_statistic"] = (y - mean) / sd
        if config.alpha is None:
            detail["mode"] = "multiplier"
            threshold = mean + config.multiplier * sd
        else:
            detail["mode"] = "t-quantile"
            tq = student_t_quantile(k - 1, 1.0 - config.alpha)
            threshold = mean + tq * sd * math.sqrt(1.0 + 1.0 / k)
        alarm = y > threshold
    return AlarmRecord(time_index=t, statistic_value=y, threshold=threshold,
                       alarm=alarm, detail=detail)


def stroup_history(series: CountSeries, t: int, half_window: int) -> list[int]:
    """Indices {t - i*P + j} for i = 1.. and |j| <= half_window, clipped to
    the observed past. Raises when no previous season is reachable."""
    if half_window < 0:
        raise ValueError("half_window must be >= 0")
    P = series.period_length
    idx = []
    i = 1
    while t - i * P + half_window >= 0:
        for j in range(-half_window, half_window + 1):
            s = t - i * P + j
            if 0 <= s < t:
                idx.append(s)
        i += 1
    if not idx:
        raise ValueError(f"no historic points {P} or more steps before t={t}")
    return sorted(idx)


def _farrington_history(series: CountSeries, t: int, b: int, w: int) -> tuple[list[int], int]:
    """Historic indices for b years back; a year keeping less than half of
    its 2w+1 window is disqualified. Returns (indices, usable_years)."""
    P = series.period_length
    if t - b * P < 0:
        raise ValueError(f"need {b} full seasons before t={t} (period {P})")
    window = 2 * w + 1
    idx: list[int] = []
    years = 0
    for i in range(1, b + 1):
        kept = [t - i * P + j for j in range(-w, w + 1) if 0 <= t - i * P + j < t]
        if len(kept) * 2 < window:
            continue
        idx.extend(kept)
        years += 1
    if not idx:
        raise ValueError("all historic windows disqualified")
    return sorted(idx), years


def _anscombe_residuals(y: np.ndarray, mu: np.ndarray, phi: float) -> np.ndarray:
    return 3.0 * (y ** (2.0 / 3.0) - mu ** (2.0 / 3.0)) / (2.0 * mu ** (1.0 / 6.0) * math.sqrt(phi))


def _design(idx: np.ndarray, trend: bool) -> np.ndarray:
    if trend:
        return np.column_stack([np.ones(idx.size), idx.astype(float)])
    return np.ones((idx.size, 1))


def farrington(series: CountSeries, t: int,
               config: FarringtonConfig = FarringtonConfig()) -> AlarmRecord:
    """Farrington decision at index t.

    Quasi-Poisson fit on the b(2w+1) historic values with intercept and
    optional linear trend. The trend stays in only if it is significant at
    the 0.05 level, at least 3 years of history are usable, and it does not
    over-extrapolate (mu_hat above the historic maximum). Optional second
    fit with weights from Anscombe residuals downweights past outbreaks.
    """
    if t >= len(series):
        raise IndexError(f"t={t} outside the series")
    idx_list, usable_years = _farrington_history(series, t, config.b, config.w)
    idx = np.asarray(idx_list)
    y_hist = series.values[idx].astype(float)
    y = float(series.values[t])
    hist_max = float(y_hist.max())
    detail: dict = {"method": "farrington", "n_history": int(idx.size),
                    "usable_years": usable_years, "scale": config.scale}

    if y_hist.sum() == 0:
        fit = fit_quasipoisson(_design(idx, False), y_hist)
        x_now = np.array([1.0])
        detail["degenerate"] = True
        detail["trend_included"] = False
    else:
        trend_included = False
        fit = None
        if config.trend_rules_enabled and usable_years >= 3:
            cand = fit_quasipoisson(_design(idx, True), y_hist)
            if cand.converged:
                se = math.sqrt(max(cand.covariance[1, 1], 0.0))
                if se > 0:
                    wald_z = cand.coefficients[1] / se
                    mu_now = cand.mean_at([1.0, float(t)])
                    if (abs(wald_z) > normal_quantile(0.975)
                            and mu_now <= hist_max):
                        fit = cand
                        trend_included = True
        if fit is None:
            fit = fit_quasipoisson(_design(idx, False), y_hist)
        x_now = np.array([1.0, float(t)]) if trend_included else np.array([1.0])
        detail["trend_included"] = trend_included

        if config.reweight_enabled and not fit.degenerate:
            mu_hist = np.exp(np.clip(_design(idx, trend_included) @ fit.coefficients, -30, 30))
            resid = _anscombe_residuals(y_hist, mu_hist, fit.dispersion)
            weights = np.where(resid > 1.0, resid ** -2.0, 1.0)
            weights *= idx.size / weights.sum()
            detail["reweighted"] = bool(np.any(weights != 1.0))
            fit = fit_quasipoisson(_design(idx, trend_included), y_hist, weights)

    interval = predict_upper(fit, x_now, config.alpha, config.scale)
    detail.update(mu_hat=interval.mean, dispersion=fit.dispersion,
                  converged=fit.converged)
    return AlarmRecord(time_index=t, statistic_value=y, threshold=interval.upper,
                       alarm=y > interval.upper, detail=detail)


def _harmonic_design_row(t: float, period: int, n_harmonics: int,
                         include_trend: bool) -> np.ndarray:
    cols = [1.0]
    if include_trend:
        cols.append(float(t))
    for l in range(1, n_harmonics + 1):
        ang = 2.0 * math.pi * l * t / period
        cols.extend([math.sin(ang), math.cos(ang)])
    return np.asarray(cols)


@dataclass(frozen=True)
class HarmonicModel:
    """Seasonal mean model: log mu_t = b0 [+ b1 t] + sum_l harmonics of period P."""

    fit: GlmFit
    period_length: int
    n_harmonics: int
    include_trend: bool

    def design_row(self, t: float) -> np.ndarray:
        return _harmonic_design_row(t, self.period_length, self.n_harmonics,
                                    self.include_trend)

    def mean_at(self, t: float) -> float:
        return self.fit.mean_at(self.design_row(t))

    def fitted_means(self, n_time: int) -> np.ndarray:
        return np.array([self.mean_at(t) for t in range(n_time)])


def harmonic_mean_model(series: CountSeries,
                        config: HarmonicModelConfig = HarmonicModelConfig(),
                        through: Optional[int] = None) -> HarmonicModel:
    """Fit the trend + harmonics quasi-Poisson mean model.

    ``through`` restricts the fit to indices < through (prospective use);
    default is the whole series.
    """
    n = len(series) if through is None else through
    n_params = 1 + (1 if config.include_trend else 0) + 2 * config.n_harmonics
    if n_params + 1 > n:
        raise ValueError(f"need more than {n_params} observations, have {n}")
    X = np.vstack([
        _harmonic_design_row(t, series.period_length, config.n_harmonics,
                             config.include_trend)
        for t in range(n)
    ])
    fit = fit_quasipoisson(X, series.values[:n].astype(float))
    return HarmonicModel(fit=fit, period_length=series.period_length,
                         n_harmonics=config.n_harmonics,
                         include_trend=config.include_trend)
