"""Frequentist space-time scan statistics: the conditional Poisson scan,
the space-time permutation scan, the expectation-based Poisson scan, and
linear-time subset scanning, with Monte Carlo / pooled / Gumbel P-values.

All statistics are computed and compared on the log scale. Every scanned
window ends at the most recent time step of the analyzed slice. Windows
whose baseline sum is zero (or whose complement holds counts but no
baseline mass) are skipped entirely: the likelihood ratio is undefined
there and population-less cells cannot host clusters under the model.
"""

from __future__ import annotations

import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .data import AlarmRecord, CountPanel, CountSeries, StudyGeometry
from .glm import gumbel_fit_and_sf
from .univariate import HarmonicModelConfig, harmonic_mean_model
from .zones import SpaceTimeWindow, Zone


# ---------------------------------------------------------------------------
# Per-window statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WindowAggregate:
    """Observed and baseline sums inside a window and in total."""

    y_w: float
    b_w: float
    y_total: float
    b_total: float

    def __post_init__(self):
        if not 0 <= self.y_w <= self.y_total:
            raise ValueError("need 0 <= Y_W <= Y")
        if not 0 <= self.b_w <= self.b_total:
            raise ValueError("need 0 <= B_W <= B")


def kulldorff_log_lr(agg: WindowAggregate) -> float:
    """Conditional Poisson log likelihood ratio for one window.

    log lambda_W = Y_W log(Y_W/B_W) + (Y-Y_W) log((Y-Y_W)/(B-B_W)) when
    Y_W > B_W, else 0; assumes baselines normalized so B = Y. Windows with
    B_W = 0 must be excluded upstream (the ratio degenerates to +inf).
    """
    y_w, b_w = agg.y_w, agg.b_w
    y, b = agg.y_total, agg.b_total
    if y <= 0:
        raise ValueError("need a positive total count")
    if b_w == 0 and y_w > 0:
        raise ValueError("B_W = 0 with Y_W > 0: undefined window, exclude it")
    if y_w <= b_w:
        return 0.0
    rest_y, rest_b = y - y_w, b - b_w
    if rest_b == 0 and rest_y > 0:
        raise ValueError("complement has counts but no baseline mass")
    out = y_w * math.log(y_w / b_w)
    if rest_y > 0:
        out += rest_y * math.log(rest_y / rest_b)
    return out


def eb_poisson_log_lr(y_w: float, b_w: float) -> float:
    """Expectation-based Poisson log likelihood ratio against q = 1:
    Y_W log(Y_W/B_W) - (Y_W - B_W) when Y_W > B_W, else 0."""
    if b_w < 0 or y_w < 0:
        raise ValueError("sums must be non-negative")
    if y_w <= b_w:
        return 0.0
    if b_w == 0:
        raise ValueError("B_W = 0 with Y_W > 0: undefined window, exclude it")
    return y_w * math.log(y_w / b_w) - (y_w - b_w)


# ---------------------------------------------------------------------------
# Window indexing and vectorized scoring
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _WindowIndex:
    """Dense zone-membership matrix and a (zone, duration) presence mask."""

    zones: tuple[Zone, ...]
    membership: np.ndarray      # (n_zones, n_regions) float 0/1
    mask: np.ndarray            # (n_zones, d_max) bool
    d_max: int

    @classmethod
    def build(cls, windows: Sequence[SpaceTimeWindow], n_regions: int) -> "_WindowIndex":
        if not windows:
            raise ValueError("no windows to scan")
        zones = sorted({w.zone for w in windows}, key=lambda z: (len(z), z.regions))
        zid = {z: i for i, z in enumerate(zones)}
        d_max = max(w.duration for w in windows)
        membership = np.zeros((len(zones), n_regions))
        for z, i in zid.items():
            if max(z.regions) >= n_regions:
                raise ValueError(f"zone {z.regions} outside the region range")
            membership[i, list(z.regions)] = 1.0
        mask = np.zeros((len(zones), d_max), dtype=bool)
        for w in windows:
            mask[zid[w.zone], w.duration - 1] = True
        return cls(tuple(zones), membership, mask, d_max)


def _trailing_sums(matrix: np.ndarray, d_max: int) -> np.ndarray:
    """columns d=1..d_max of trailing sums over the last d time steps."""
    rc = np.cumsum(matrix[:, ::-1], axis=1)
    return rc[:, :d_max]


def _conditional_stat_matrix(yw: np.ndarray, bw: np.ndarray, y_total: float,
                             b_total: float) -> np.ndarray:
    rest_y = y_total - yw
    rest_b = b_total - bw
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(yw > 0, yw * np.log(np.where(yw > 0, yw / np.where(bw > 0, bw, 1.0), 1.0)), 0.0)
        t2 = np.where(rest_y > 0, rest_y * np.log(
            np.where(rest_y > 0, rest_y / np.where(rest_b > 0, rest_b, 1.0), 1.0)), 0.0)
    stat = np.where(yw > bw, t1 + t2, 0.0)
    invalid = (bw == 0) | ((rest_b == 0) & (rest_y > 0))
    return np.where(invalid, -np.inf, stat)


def _eb_stat_matrix(yw: np.ndarray, bw: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(yw > 0, yw * np.log(np.where(yw > 0, yw / np.where(bw > 0, bw, 1.0), 1.0)), 0.0)
    stat = np.where(yw > bw, t1 - (yw - bw), 0.0)
    return np.where(bw == 0, -np.inf, stat)


def _window_sums(matrix: np.ndarray, index: _WindowIndex) -> np.ndarray:
    return index.membership @ _trailing_sums(matrix, index.d_max)


def _select_mlc(stat: np.ndarray, index: _WindowIndex) -> tuple[float, int, int]:
    """Max statistic and its (zone_idx, duration) under the deterministic tie
    rule: smallest zone, then shortest duration, then lexicographic regions."""
    masked = np.where(index.mask, stat, -np.inf)
    best = masked.max()
    if best == -np.inf:
        raise ValueError("no scannable window (all windows excluded)")
    cand = np.argwhere(masked == best)
    zi, di = min(
        (tuple(c) for c in cand),
        key=lambda c: (len(index.zones[c[0]]), c[1], index.zones[c[0]].regions))
    return float(best), int(zi), int(di) + 1


def _lambda_star(stat: np.ndarray, mask: np.ndarray) -> float:
    return float(np.where(mask, stat, -np.inf).max())


# ---------------------------------------------------------------------------
# Monte Carlo replication
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MonteCarloConfig:
    """Replication settings; replicate r of analysis a draws from an RNG
    stream keyed by (seed, a, r), so results are independent of worker
    count and replicates can be compared across runs."""

    n_replicates: int = 999
    seed: int = 0
    analysis_index: int = 0
    n_workers: int = 1

    def __post_init__(self):
        if self.n_replicates < 0:
            raise ValueError("n_replicates must be >= 0")
        if self.n_workers < 1:
            raise ValueError("n_workers must be >= 1")


def _replicate_rng(mc: MonteCarloConfig, r: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=mc.seed,
                                 spawn_key=(mc.analysis_index, r))
    return np.random.Generator(np.random.PCG64(seq))


def _multinomial_by_inversion(rng: np.random.Generator, total: int,
                              cdf: np.ndarray, n_cells: int) -> np.ndarray:
    """Conditional-on-total sampling via CDF inversion of the flattened cell
    probabilities."""
    cells = np.searchsorted(cdf, rng.random(total), side="right")
    return np.bincount(cells, minlength=n_cells)


@dataclass(frozen=True)
class _ReplicateJob:
    mode: str                    # multinomial | permutation | poisson
    stat_kind: str               # conditional | eb
    baselines: np.ndarray        # normalized, (N, T)
    membership: np.ndarray
    mask: np.ndarray
    d_max: int
    y_total: int
    mc: MonteCarloConfig
    case_regions: Optional[np.ndarray] = None
    case_times: Optional[np.ndarray] = None


def _replicate_lambdas(job: _ReplicateJob, r_indices: Sequence[int]) -> list[float]:
    n, t = job.baselines.shape
    b_total = float(job.baselines.sum())
    bw = job.membership @ _trailing_sums(job.baselines, job.d_max)
    if job.mode == "multinomial":
        probs = (job.baselines / b_total).ravel()
        cdf = np.cumsum(probs)
        cdf[-1] = 1.0
    out = []
    for r in r_indices:
        rng = _replicate_rng(job.mc, r)
        if job.mode == "multinomial":
            counts = _multinomial_by_inversion(rng, job.y_total, cdf, n * t)
            counts = counts.reshape(n, t).astype(float)
        elif job.mode == "permutation":
            times = rng.permutation(job.case_times)
            flat = np.bincount(job.case_regions * t + times, minlength=n * t)
            counts = flat.reshape(n, t).astype(float)
        elif job.mode == "poisson":
            counts = rng.poisson(job.baselines).astype(float)
        else:
            raise ValueError(f"unknown replication mode {job.mode!r}")
        yw = job.membership @ _trailing_sums(counts, job.d_max)
        if job.stat_kind == "conditional":
            stat = _conditional_stat_matrix(yw, bw, float(counts.sum()), b_total)
        else:
            stat = _eb_stat_matrix(yw, bw)
        out.append(_lambda_star(stat, job.mask))
    return out


def _run_replicates(job: _ReplicateJob) -> np.ndarray:
    mc = job.mc
    if mc.n_replicates == 0:
        return np.empty(0)
    indices = list(range(mc.n_replicates))
    if mc.n_workers == 1:
        return np.asarray(_replicate_lambdas(job, indices))
    chunks = [indices[i::mc.n_workers] for i in range(mc.n_workers)]
    chunks = [c for c in chunks if c]
    results: dict[int, float] = {}
    with ProcessPoolExecutor(max_workers=mc.n_workers) as pool:
        for chunk, values in zip(chunks, pool.map(_replicate_lambdas,
                                                  [job] * len(chunks), chunks)):
            results.update(zip(chunk, values))
    return np.asarray([results[r] for r in indices])


# ---------------------------------------------------------------------------
# P-values and replicate pooling
# ---------------------------------------------------------------------------

class ReplicatePool:
    """Ring buffer of replicate maxima from the most recent `depth` analyses,
    pooled into the current analysis's Monte Carlo P-value."""

    def __init__(self, depth: int = 0):
        if depth < 0:
            raise ValueError("depth must be >= 0")
        self.depth = depth
        self._analyses: deque[np.ndarray] = deque(maxlen=depth if depth else None)

    def pooled(self) -> np.ndarray:
        if self.depth == 0 or not self._analyses:
            return np.empty(0)
        return np.concatenate(list(self._analyses))

    def push(self, replicates: np.ndarray) -> None:
        if self.depth > 0:
            self._analyses.append(np.asarray(replicates, dtype=float))

    def __len__(self) -> int:
        return int(sum(a.size for a in self._analyses))


def pooled_pvalue(replicates: np.ndarray, lambda_obs: float) -> float:
    """Monte Carlo P-value with the strict-rank convention:
    (1 + #{lambda_r > lambda_obs}) / (1 + R)."""
    reps = np.asarray(replicates, dtype=float)
    return float((1 + np.count_nonzero(reps > lambda_obs)) / (1 + reps.size))


def gumbel_pvalue(replicates: np.ndarray, lambda_obs: float) -> float:
    """Approximate P-value from a method-of-moments Gumbel fit to the
    replicate maxima; accurate in the far tails at a fraction of the
    replication cost."""
    return gumbel_fit_and_sf(np.asarray(replicates, dtype=float), lambda_obs)


# ---------------------------------------------------------------------------
# Baseline estimators
# ---------------------------------------------------------------------------

def estimate_baselines_population(counts, geometry: StudyGeometry) -> np.ndarray:
    """b_it = (Y/T) * Pop_i / Pop_total, constant over time; sums to Y."""
    counts = _as_counts(counts)
    n, t = counts.shape
    if geometry.n_regions != n:
        raise ValueError("geometry does not match the panel")
    y_total = counts.sum()
    share = geometry.populations / geometry.total_population
    return np.tile((y_total / t) * share[:, None], (1, t))


def estimate_baselines_permutation(counts) -> np.ndarray:
    """b_it = row_sum_i * col_sum_t / Y; reproduces both margins exactly."""
    counts = _as_counts(counts)
    y_total = counts.sum()
    if y_total == 0:
        raise ValueError("cannot estimate baselines from an all-zero panel")
    return np.outer(counts.sum(axis=1), counts.sum(axis=0)) / y_total


def estimate_baselines_history(counts, n_scan: int, method: str = "mean",
                               period_length: int = 1) -> np.ndarray:
    """Expectation-based baselines for the trailing n_scan columns, estimated
    only from the columns strictly before them (moving average or the
    harmonic quasi-Poisson mean model)."""
    counts = _as_counts(counts)
    n, t = counts.shape
    if not 0 < n_scan < t:
        raise ValueError("need history before the scanned block")
    hist = counts[:, : t - n_scan].astype(float)
    if method == "mean":
        means = hist.mean(axis=1)
        return np.tile(means[:, None], (1, n_scan))
    if method == "harmonic":
        out = np.empty((n, n_scan))
        for i in range(n):
            model = harmonic_mean_model(
                CountSeries(hist[i].astype(np.int64), period_length),
                HarmonicModelConfig(n_harmonics=1, include_trend=False))
            out[i] = [model.mean_at(t - n_scan + j) for j in range(n_scan)]
        return out
    raise ValueError(f"unknown baseline method {method!r}")


def _as_counts(counts) -> np.ndarray:
    if isinstance(counts, CountPanel):
        return counts.counts
    arr = np.asarray(counts)
    if arr.ndim != 2:
        raise ValueError("counts must be a 2-d region x time matrix")
    if np.any(arr < 0):
        raise ValueError("counts must be non-negative")
    return arr


# ---------------------------------------------------------------------------
# Scan drivers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanResult:
    """Maximum statistic, most likely cluster and its relative risks."""

    log_lambda_star: float
    mlc: Optional[SpaceTimeWindow]
    p_value: Optional[float]
    q_in: float
    q_out: float
    replicates: np.ndarray = field(repr=False, default_factory=lambda: np.empty(0))
    window_stats: Optional[list[tuple[SpaceTimeWindow, float]]] = field(
        repr=False, default=None)
    degenerate: bool = False


def _finish_scan(method: str, counts: np.ndarray, baselines: np.ndarray,
                 index: _WindowIndex, stat: np.ndarray, replicates: np.ndarray,
                 pool: Optional[ReplicatePool], alpha: float,
                 keep_windows: bool, time_index: int) -> tuple[ScanResult, AlarmRecord]:
    y_total = float(counts.sum())
    b_total = float(baselines.sum())
    best, zi, dur = _select_mlc(stat, index)
    mlc = SpaceTimeWindow(zone=index.zones[zi], duration=dur)
    yw = float(counts[list(mlc.zone.regions), -dur:].sum())
    bw = float(baselines[list(mlc.zone.regions), -dur:].sum())
    q_in = yw / bw if bw > 0 else math.inf
    q_out = (y_total - yw) / (b_total - bw) if b_total > bw else math.nan

    past = pool.pooled() if pool is not None else np.empty(0)
    all_reps = np.concatenate([replicates, past]) if past.size else replicates
    p_value = pooled_pvalue(all_reps, best) if all_reps.size else None
    if pool is not None:
        pool.push(replicates)

    window_stats = None
    if keep_windows:
        window_stats = []
        for zj, zone in enumerate(index.zones):
            for d in range(1, index.d_max + 1):
                if index.mask[zj, d - 1] and np.isfinite(stat[zj, d - 1]):
                    window_stats.append(
                        (SpaceTimeWindow(zone=zone, duration=d), float(stat[zj, d - 1])))

    result = ScanResult(log_lambda_star=best, mlc=mlc, p_value=p_value,
                        q_in=q_in, q_out=q_out, replicates=replicates,
                        window_stats=window_stats)
    alarm = p_value is not None and p_value <= alpha
    record = AlarmRecord(
        time_index=time_index, statistic_value=best,
        threshold=float(alpha), alarm=alarm,
        detail={"method": method, "p_value": p_value,
                "mlc_regions": list(mlc.zone.regions), "mlc_duration": dur,
                "q_in": q_in, "q_out": q_out,
                "n_replicates_effective": int(all_reps.size)})
    return result, record


def _degenerate_result(method: str, time_index: int) -> tuple[ScanResult, AlarmRecord]:
    result = ScanResult(log_lambda_star=0.0, mlc=None, p_value=1.0,
                        q_in=math.nan, q_out=math.nan, degenerate=True)
    record = AlarmRecord(time_index=time_index, statistic_value=0.0,
                         threshold=0.0, alarm=False,
                         detail={"method": method, "degenerate": True,
                                 "p_value": 1.0})
    return result, record


def scan_poisson_conditional(counts, baselines, windows: Sequence[SpaceTimeWindow],
                             alpha: float = 0.05,
                             mc: MonteCarloConfig = MonteCarloConfig(),
                             pool: Optional[ReplicatePool] = None,
                             keep_windows: bool = False,
                             time_index: int = -1) -> tuple[ScanResult, AlarmRecord]:
    """Prospective conditional Poisson scan.

    Baselines are renormalized so their total matches the observed total;
    replication is multinomial over all cells conditional on that total.
    """
    counts = _as_counts(counts).astype(float)
    b_raw = np.asarray(baselines, dtype=float)
    if b_raw.shape != counts.shape:
        raise ValueError("baselines must match the counts shape")
    if np.any(b_raw < 0):
        raise ValueError("baselines must be non-negative")
    y_total = counts.sum()
    if y_total == 0:
        return _degenerate_result("kulldorff", time_index)
    if b_raw.sum() <= 0:
        raise ValueError("baselines sum to zero")
    b = b_raw * (y_total / b_raw.sum())

    index = _WindowIndex.build(windows, counts.shape[0])
    _check_duration(index, counts.shape[1])
    yw = _window_sums(counts, index)
    bw = _window_sums(b, index)
    stat = _conditional_stat_matrix(yw, bw, float(y_total), float(b.sum()))
    job = _ReplicateJob(mode="multinomial", stat_kind="conditional",
                        baselines=b, membership=index.membership,
                        mask=index.mask, d_max=index.d_max,
                        y_total=int(y_total), mc=mc)
    replicates = _run_replicates(job)
    return _finish_scan("kulldorff", counts, b, index, stat, replicates, pool,
                        alpha, keep_windows, time_index)


def scan_permutation(counts, windows: Sequence[SpaceTimeWindow],
                     alpha: float = 0.05,
                     mc: MonteCarloConfig = MonteCarloConfig(),
                     pool: Optional[ReplicatePool] = None,
                     keep_windows: bool = False,
                     time_index: int = -1) -> tuple[ScanResult, AlarmRecord]:
    """Space-time permutation scan: baselines from the count margins, and
    replication by permuting the time stamps of the individual cases so
    both margins are preserved exactly."""
    counts = _as_counts(counts).astype(float)
    y_total = counts.sum()
    if y_total == 0:
        return _degenerate_result("permutation", time_index)
    b = estimate_baselines_permutation(counts)

    n, t = counts.shape
    flat = counts.astype(int).ravel()
    cells = np.repeat(np.arange(n * t), flat)
    case_regions = cells // t
    case_times = cells % t

    index = _WindowIndex.build(windows, n)
    _check_duration(index, t)
    yw = _window_sums(counts, index)
    bw = _window_sums(b, index)
    stat = _conditional_stat_matrix(yw, bw, float(y_total), float(b.sum()))
    job = _ReplicateJob(mode="permutation", stat_kind="conditional",
                        baselines=b, membership=index.membership,
                        mask=index.mask, d_max=index.d_max,
                        y_total=int(y_total), mc=mc,
                        case_regions=case_regions, case_times=case_times)
    replicates = _run_replicates(job)
    return _finish_scan("permutation", counts, b, index, stat, replicates,
                        pool, alpha, keep_windows, time_index)


def scan_eb_poisson(counts, baselines, windows: Sequence[SpaceTimeWindow],
                    alpha: float = 0.05,
                    mc: MonteCarloConfig = MonteCarloConfig(),
                    pool: Optional[ReplicatePool] = None,
                    keep_windows: bool = False,
                    time_index: int = -1) -> tuple[ScanResult, AlarmRecord]:
    """Expectation-based Poisson scan: baselines come from history believed
    outbreak-free, the statistic tests q > 1 inside the window only, and
    replication draws independent Poisson counts (not conditioned on the
    total)."""
    counts = _as_counts(counts).astype(float)
    b = np.asarray(baselines, dtype=float)
    if b.shape != counts.shape:
        raise ValueError("baselines must match the counts shape")
    if np.any(b < 0):
        raise ValueError("baselines must be non-negative")
    if counts.sum() == 0 and b.sum() == 0:
        return _degenerate_result("eb-poisson", time_index)

    index = _WindowIndex.build(windows, counts.shape[0])
    _check_duration(index, counts.shape[1])
    yw = _window_sums(counts, index)
    bw = _window_sums(b, index)
    stat = _eb_stat_matrix(yw, bw)
    job = _ReplicateJob(mode="poisson", stat_kind="eb", baselines=b,
                        membership=index.membership, mask=index.mask,
                        d_max=index.d_max, y_total=int(counts.sum()), mc=mc)
    replicates = _run_replicates(job)
    return _finish_scan("eb-poisson", counts, b, index, stat, replicates,
                        pool, alpha, keep_windows, time_index)


def _check_duration(index: _WindowIndex, n_time: int) -> None:
    if index.d_max > n_time:
        raise ValueError(f"window duration {index.d_max} exceeds the "
                         f"{n_time} available time steps")


# ---------------------------------------------------------------------------
# Linear-time subset scanning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LtssResult:
    subset: tuple[int, ...]
    score: float


def ltss_scan(y_by_region, b_by_region) -> LtssResult:
    """Highest-scoring region subset for the expectation-based Poisson score.

    Regions are sorted by the priority Y_i/B_i (descending, stable); the
    score only needs evaluating on the top-j prefixes, and the best prefix
    equals the best of all 2^N - 1 subsets. Returns the empty subset with
    score 0 when no subset beats its baseline.
    """
    y = np.asarray(y_by_region, dtype=float)
    b = np.asarray(b_by_region, dtype=float)
    if y.shape != b.shape or y.ndim != 1:
        raise ValueError("need matching 1-d aggregates")
    if np.any(b <= 0):
        raise ValueError("baselines must be positive for the priority sort")
    if np.any(y < 0):
        raise ValueError("counts must be non-negative")
    priority = y / b
    order = np.lexsort((np.arange(y.size), -priority))
    cum_y = np.cumsum(y[order])
    cum_b = np.cumsum(b[order])
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = np.where(cum_y > cum_b,
                          cum_y * np.log(np.where(cum_y > 0, cum_y / cum_b, 1.0))
                          - (cum_y - cum_b), 0.0)
    best_j = int(np.argmax(scores))
    if scores[best_j] <= 0.0:
        return LtssResult(subset=(), score=0.0)
    subset = tuple(sorted(int(i) for i in order[: best_j + 1]))
    return LtssResult(subset=subset, score=float(scores[best_j]))
