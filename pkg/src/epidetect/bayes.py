"""Bayesian space-time scan: conjugate gamma-Poisson marginal likelihoods,
posterior outbreak probabilities per window, and sequential updating of the
inside-window relative-risk hyperparameter.

No Monte Carlo replication is needed; with gamma priors on the relative
risks the data marginals are negative binomial in closed form and the
posterior over {H0} + {H1(W)} follows from Bayes' formula directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .data import AlarmRecord
from .scan import _WindowIndex, _as_counts, _check_duration, _window_sums
from .zones import SpaceTimeWindow


@dataclass(frozen=True)
class GammaPrior:
    shape: float
    rate: float

    def __post_init__(self):
        if self.shape <= 0 or self.rate <= 0:
            raise ValueError("gamma parameters must be positive")


def negbin_log_marginal(y: int, b: float, prior: GammaPrior) -> float:
    """log P(Y = y) when Y | q ~ Poisson(q*b) and q ~ Gamma(shape, rate):
    the gamma-Poisson mixture (negative binomial) mass

        Gamma(a+y) / (y! Gamma(a)) * (r/(r+b))^a * (b/(r+b))^y.
    """
    if y < 0 or int(y) != y:
        raise ValueError("count must be a non-negative integer")
    if b <= 0:
        raise ValueError("baseline sum must be positive")
    a, r = prior.shape, prior.rate
    y = int(y)
    out = a * math.log(r / (r + b))
    if y > 0:
        out += (gammaln(a + y) - gammaln(a) - gammaln(y + 1)
                + y * math.log(b / (r + b)))
    return float(out)


@dataclass(frozen=True)
class OutbreakPriors:
    """Prior specification for one analysis.

    ``alpha_w_values`` and ``alpha_w_weights`` discretize the inside-window
    gamma shape; the weights are updated to the posterior after each
    analysis so the next month starts from the learned distribution.
    """

    p_h1: float = 1e-7
    alpha_w_values: np.ndarray = field(
        default_factory=lambda: np.linspace(1.0, 15.0, 10))
    alpha_w_weights: Optional[np.ndarray] = None
    beta_w: float = 1.0
    prior_all: GammaPrior = GammaPrior(1.0, 1.0)
    prior_outside: Optional[GammaPrior] = None
    window_weights: Optional[np.ndarray] = None
    reporting_threshold: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.p_h1 <= 1.0:
            raise ValueError("p_h1 must lie in [0, 1]")
        values = np.asarray(self.alpha_w_values, dtype=float)
        if values.size < 1 or np.any(values <= 0):
            raise ValueError("alpha_w grid must be positive")
        weights = self.alpha_w_weights
        if weights is None:
            weights = np.full(values.size, 1.0 / values.size)
        else:
            weights = np.asarray(weights, dtype=float)
            if weights.shape != values.shape or np.any(weights < 0):
                raise ValueError("grid weights must align with grid values")
            if abs(weights.sum() - 1.0) > 1e-9:
                raise ValueError("grid weights must sum to 1")
        if self.beta_w <= 0:
            raise ValueError("beta_w must be positive")
        object.__setattr__(self, "alpha_w_values", values)
        object.__setattr__(self, "alpha_w_weights", weights)

    def outside(self) -> GammaPrior:
        return self.prior_outside if self.prior_outside is not None else self.prior_all


def elicit_window_prior(windows: Sequence[SpaceTimeWindow],
                        p_h1: float) -> np.ndarray:
    """Uniform window prior: P(H1(W)) = p_h1 / #windows for every W."""
    if not windows:
        raise ValueError("no windows")
    if not 0.0 <= p_h1 <= 1.0:
        raise ValueError("p_h1 must lie in [0, 1]")
    return np.full(len(windows), p_h1 / len(windows))


@dataclass(frozen=True)
class PosteriorResult:
    windows: tuple[SpaceTimeWindow, ...]
    window_posteriors: np.ndarray
    null_posterior: float
    map_window: Optional[SpaceTimeWindow]
    updated_priors: OutbreakPriors

    def top_windows(self, k: int = 10) -> list[tuple[SpaceTimeWindow, float]]:
        order = np.argsort(self.window_posteriors)[::-1][:k]
        return [(self.windows[i], float(self.window_posteriors[i])) for i in order]


def bayes_scan(counts, baselines, windows: Sequence[SpaceTimeWindow],
               priors: OutbreakPriors = OutbreakPriors(),
               time_index: int = -1) -> tuple[PosteriorResult, AlarmRecord]:
    """Posterior outbreak probability for every candidate window.

    P(y | H0) is the negative-binomial marginal of the whole panel;
    P(y | H1(W)) factorizes into inside/outside marginals, the inside shape
    marginalized over the discrete grid. Everything is normalized in log
    space, and the grid weights are updated to their posterior
    (conditional on an outbreak) for use as the next analysis's prior.
    """
    counts = _as_counts(counts).astype(float)
    b = np.asarray(baselines, dtype=float)
    if b.shape != counts.shape:
        raise ValueError("baselines must match the counts shape")
    if np.any(b <= 0):
        raise ValueError("Bayesian scan needs positive baselines on all cells")

    window_list = list(windows)
    index = _WindowIndex.build(window_list, counts.shape[0])
    _check_duration(index, counts.shape[1])
    y_total = float(counts.sum())
    b_total = float(b.sum())

    yw_grid = _window_sums(counts, index)
    bw_grid = _window_sums(b, index)
    zid = {z: i for i, z in enumerate(index.zones)}
    yw = np.array([yw_grid[zid[w.zone], w.duration - 1] for w in window_list])
    bw = np.array([bw_grid[zid[w.zone], w.duration - 1] for w in window_list])

    log_h0 = negbin_log_marginal(int(round(y_total)), b_total, priors.prior_all)

    grid = priors.alpha_w_values
    log_grid_w = np.log(priors.alpha_w_weights)
    outside_prior = priors.outside()
    n_win = len(window_list)
    # log P(y | H1(W), alpha_g): (n_windows, grid)
    log_like_wg = np.empty((n_win, grid.size))
    for j in range(n_win):
        y_in, b_in = int(round(yw[j])), float(bw[j])
        y_out = int(round(y_total - yw[j]))
        b_out = max(float(b_total - bw[j]), 0.0)
        if b_out == 0.0 or b_out < 1e-12 * b_total:
            # window covers the whole panel: nothing outside to explain
            out_term = 0.0 if y_out == 0 else -np.inf
        else:
            out_term = negbin_log_marginal(y_out, b_out, outside_prior)
        for g, a in enumerate(grid):
            log_like_wg[j, g] = (negbin_log_marginal(y_in, b_in,
                                                     GammaPrior(a, priors.beta_w))
                                 + out_term)
    log_like_w = logsumexp(log_like_wg + log_grid_w[None, :], axis=1)

    if priors.window_weights is not None:
        wprior = np.asarray(priors.window_weights, dtype=float)
        if wprior.shape != (n_win,):
            raise ValueError("window_weights must align with windows")
        if abs(wprior.sum() - priors.p_h1) > 1e-9:
            raise ValueError("window prior must sum to p_h1")
    else:
        wprior = elicit_window_prior(window_list, priors.p_h1)

    with np.errstate(divide="ignore"):
        log_joint_w = log_like_w + np.log(wprior)
        log_joint_0 = log_h0 + (np.log(1.0 - priors.p_h1)
                                if priors.p_h1 < 1.0 else -np.inf)
    log_evidence = logsumexp(np.append(log_joint_w, log_joint_0))
    window_post = np.exp(log_joint_w - log_evidence)
    null_post = float(np.exp(log_joint_0 - log_evidence))

    # posterior over the inside-shape grid, conditional on an outbreak
    with np.errstate(divide="ignore"):
        log_grid_post = logsumexp(
            log_like_wg + log_grid_w[None, :] + np.log(wprior)[:, None], axis=0)
    if np.all(np.isinf(log_grid_post)):
        new_weights = priors.alpha_w_weights
    else:
        new_weights = np.exp(log_grid_post - logsumexp(log_grid_post))
        new_weights = new_weights / new_weights.sum()
    updated = replace(priors, alpha_w_weights=new_weights)

    if n_win:
        best = int(np.argmax(window_post))
        map_window = window_list[best]
        max_post = float(window_post[best])
    else:
        map_window, max_post = None, 0.0
    result = PosteriorResult(windows=tuple(window_list),
                             window_posteriors=window_post,
                             null_posterior=null_post, map_window=map_window,
                             updated_priors=updated)
    record = AlarmRecord(
        time_index=time_index, statistic_value=max_post,
        threshold=priors.reporting_threshold,
        alarm=max_post > priors.reporting_threshold,
        detail={"method": "bayes",
                "null_posterior": null_post,
                "map_regions": list(map_window.zone.regions) if map_window else [],
                "map_duration": map_window.duration if map_window else 0,
                "top_windows": [
                    {"regions": list(w.zone.regions), "duration": w.duration,
                     "posterior": p} for w, p in result.top_windows(10)]})
    return result, record
