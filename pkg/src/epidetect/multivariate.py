"""Hotelling T-squared monitoring of a p-variate count vector series with
F-distribution thresholds, plus Crosier's CUSUM accumulation of sqrt(T2)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .data import AlarmRecord
from .glm import f_quantile


@dataclass(frozen=True)
class MvBaseline:
    """Sample mean/covariance of the in-control period.

    ``policy`` is either "frozen" or "expanding"; expanding baselines fold
    each newly evaluated observation into the estimates.
    """

    mean: np.ndarray
    covariance: np.ndarray
    n_used: int
    policy: str = "frozen"
    _rows: Optional[np.ndarray] = None

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        p = mean.size
        if cov.shape != (p, p):
            raise ValueError("covariance must be (p, p)")
        if not np.allclose(cov, cov.T, atol=1e-10):
            raise ValueError("covariance must be symmetric")
        if self.policy not in ("frozen", "expanding"):
            raise ValueError("policy must be 'frozen' or 'expanding'")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @classmethod
    def from_rows(cls, rows, policy: str = "frozen") -> "MvBaseline":
        """Standard sample formulas: mean and covariance with ddof=1."""
        arr = np.atleast_2d(np.asarray(rows, dtype=float))
        n, p = arr.shape
        if n < 2:
            raise ValueError("need at least two baseline observations")
        mean = arr.mean(axis=0)
        cov = np.cov(arr, rowvar=False, ddof=1).reshape(p, p)
        return cls(mean=mean, covariance=cov, n_used=n, policy=policy,
                   _rows=arr)

    @property
    def p(self) -> int:
        return int(self.mean.size)

    def updated(self, y) -> "MvBaseline":
        """Baseline after folding in y (no-op under the frozen policy)."""
        if self.policy == "frozen":
            return self
        if self._rows is None:
            raise ValueError("expanding baseline requires the raw rows")
        rows = np.vstack([self._rows, np.asarray(y, dtype=float)])
        return MvBaseline.from_rows(rows, policy="expanding")


def hotelling_threshold(p: int, n: int, alpha: float) -> float:
    """Critical value for T2 of a new observation against estimated (mu, Sigma):
    [p(n-1)(n+1) / (n(n-p))] * F_{p, n-p; 1-alpha}."""
    if n <= p:
        raise ValueError("need n_used > p for an F threshold")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    scale = p * (n - 1) * (n + 1) / (n * (n - p))
    return scale * f_quantile(p, n - p, 1.0 - alpha)


def hotelling_t2(y, baseline: MvBaseline, alpha: float = 1.0 / 36.0) -> AlarmRecord:
    """Squared Mahalanobis distance of y from the baseline, with the scaled-F
    critical value. Raises on a singular covariance instead of silently
    using a pseudo-inverse."""
    y = np.asarray(y, dtype=float)
    if y.shape != baseline.mean.shape:
        raise ValueError("observation dimension mismatch")
    if baseline.n_used <= baseline.p:
        raise ValueError("baseline too short: need n_used > p")
    diff = y - baseline.mean
    try:
        solved = np.linalg.solve(baseline.covariance, diff)
    except np.linalg.LinAlgError:
        raise ValueError(
            "singular baseline covariance; aggregate regions or regularize "
            "before monitoring") from None
    t2 = float(diff @ solved)
    threshold = hotelling_threshold(baseline.p, baseline.n_used, alpha)
    detail = {"method": "hotelling", "p": baseline.p, "n_used": baseline.n_used,
              "alpha": alpha}
    return AlarmRecord(time_index=-1, statistic_value=t2, threshold=threshold,
                       alarm=t2 > threshold, detail=detail)


def hotelling_run(observations, baseline: MvBaseline,
                  alpha: float = 1.0 / 36.0,
                  start_index: int = 0) -> tuple[list[AlarmRecord], MvBaseline]:
    """Monitor a sequence of p-vectors, updating the baseline per its policy
    after each evaluation (single-writer state transition)."""
    records = []
    for offset, y in enumerate(np.atleast_2d(np.asarray(observations, dtype=float))):
        rec = hotelling_t2(y, baseline, alpha)
        records.append(AlarmRecord(time_index=start_index + offset,
                                   statistic_value=rec.statistic_value,
                                   threshold=rec.threshold, alarm=rec.alarm,
                                   detail=rec.detail))
        baseline = baseline.updated(y)
    return records, baseline


def simulation_threshold(baseline: MvBaseline, alpha: float,
                         n_replicates: int = 999, seed: int = 0) -> float:
    """Simulation-based alternative to the F threshold: the empirical
    (1-alpha) quantile of T2 over permuted-time resamples of the baseline
    period (last permuted row scored against the remainder)."""
    if baseline._rows is None:
        raise ValueError("simulation threshold requires the raw baseline rows")
    rows = baseline._rows
    rng = np.random.default_rng(seed)
    stats = np.empty(n_replicates)
    for r in range(n_replicates):
        perm = rng.permutation(rows.shape[0])
        ref = MvBaseline.from_rows(rows[perm[:-1]])
        rec = hotelling_t2(rows[perm[-1]], ref, alpha=0.5)
        stats[r] = rec.statistic_value
    return float(np.quantile(stats, 1.0 - alpha))


@dataclass(frozen=True)
class CusumState:
    """Crosier CUSUM accumulator over T_t = sqrt(T2_t)."""

    s: float = 0.0
    k: float = 1.0
    c: float = 5.0

    def __post_init__(self):
        if self.s < 0:
            raise ValueError("S must be >= 0")
        if self.k <= 0:
            raise ValueError("reference value k must be > 0")


def crosier_cusum(t_value: float, state: CusumState,
                  time_index: int = -1) -> tuple[CusumState, AlarmRecord]:
    """One step of S_t = max(0, S_{t-1} + T_t - k); alarm when S_t > c."""
    s_new = max(0.0, state.s + t_value - state.k)
    new_state = CusumState(s=s_new, k=state.k, c=state.c)
    rec = AlarmRecord(time_index=time_index, statistic_value=s_new,
                      threshold=state.c, alarm=s_new > state.c,
                      detail={"method": "crosier-cusum", "k": state.k,
                              "increment": t_value})
    return new_state, rec


def crosier_run(t_values: Iterable[float], state: CusumState,
                start_index: int = 0) -> tuple[list[AlarmRecord], CusumState]:
    records = []
    for offset, t_val in enumerate(t_values):
        state, rec = crosier_cusum(float(t_val), state, start_index + offset)
        records.append(rec)
    return records, state


def _mahalanobis2(diff: np.ndarray, covariance: np.ndarray) -> float:
    return float(diff @ np.linalg.solve(covariance, diff))


def crosier_reference_from_baseline(baseline: MvBaseline) -> float:
    """Default reference value k = mean of T over the baseline rows, each
    scored against the baseline built from the remaining rows."""
    if baseline._rows is None:
        raise ValueError("needs the raw baseline rows")
    rows = baseline._rows
    n = rows.shape[0]
    if n < baseline.p + 2:
        raise ValueError("baseline too short to estimate E[T]")
    ts = []
    for i in range(n):
        ref = MvBaseline.from_rows(np.delete(rows, i, axis=0))
        t2 = _mahalanobis2(rows[i] - ref.mean, ref.covariance)
        ts.append(math.sqrt(max(t2, 0.0)))
    return float(np.mean(ts))


def calibrate_crosier_threshold(baseline: MvBaseline, k: float, arl0: float,
                                n_runs: int = 200, seed: int = 0) -> float:
    """Pick c by simulation so the in-control average run length of the
    CUSUM is close to arl0 (bisection on c; multivariate normal in-control
    model with the baseline's mean and covariance)."""
    if arl0 <= 1:
        raise ValueError("arl0 must be > 1")
    rng = np.random.default_rng(seed)
    horizon = int(min(50 * arl0, 100_000))
    chol = np.linalg.cholesky(baseline.covariance)
    cov_inv = np.linalg.inv(baseline.covariance)

    def mean_rl(c: float) -> float:
        lengths = []
        for _ in range(n_runs):
            s = 0.0
            run = horizon
            for t in range(horizon):
                z = rng.standard_normal(baseline.p)
                diff = chol @ z
                t2 = float(diff @ cov_inv @ diff)
                s = max(0.0, s + math.sqrt(max(t2, 0.0)) - k)
                if s > c:
                    run = t + 1
                    break
            lengths.append(run)
        return float(np.mean(lengths))

    lo, hi = 1e-3, 1.0
    while mean_rl(hi) < arl0 and hi < 1e4:
        hi *= 2.0
    for _ in range(12):
        mid = 0.5 * (lo + hi)
        if mean_rl(mid) < arl0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
