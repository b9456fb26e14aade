import math

import numpy as np
import pytest

from epidetect.multivariate import (CusumState, MvBaseline,
                                    crosier_cusum, crosier_run,
                                    crosier_reference_from_baseline,
                                    hotelling_run, hotelling_t2,
                                    hotelling_threshold, simulation_threshold)


@pytest.fixture
def baseline():
    rng = np.random.default_rng(0)
    rows = rng.multivariate_normal([5.0, 8.0, 3.0],
                                   [[2.0, 0.5, 0.1],
                                    [0.5, 3.0, 0.2],
                                    [0.1, 0.2, 1.5]], size=40)
    return MvBaseline.from_rows(rows)


def test_t2_zero_at_the_mean(baseline):
    rec = hotelling_t2(baseline.mean, baseline)
    assert rec.statistic_value == pytest.approx(0.0, abs=1e-12)
    assert not rec.alarm


def test_t2_p1_reduces_to_squared_zscore():
    rows = np.array([[4.0], [6.0], [5.0], [7.0], [3.0]])
    base = MvBaseline.from_rows(rows)
    rec = hotelling_t2(np.array([8.0]), base)
    z = (8.0 - rows.mean()) / rows.std(ddof=1)
    assert rec.statistic_value == pytest.approx(z ** 2, rel=1e-12)


def test_t2_affine_invariance(baseline):
    rng = np.random.default_rng(2)
    y = baseline.mean + rng.normal(0, 1, 3)
    rec = hotelling_t2(y, baseline)
    for _ in range(5):
        A = rng.normal(0, 1, (3, 3))
        while abs(np.linalg.det(A)) < 1e-3:
            A = rng.normal(0, 1, (3, 3))
        shift = rng.normal(0, 5, 3)
        mapped = MvBaseline(mean=A @ baseline.mean + shift,
                            covariance=A @ baseline.covariance @ A.T,
                            n_used=baseline.n_used)
        rec2 = hotelling_t2(A @ y + shift, mapped)
        assert rec2.statistic_value == pytest.approx(rec.statistic_value,
                                                     rel=1e-8)


def test_threshold_monotone_nonincreasing_in_n():
    values = [hotelling_threshold(4, n, 1.0 / 36.0) for n in range(6, 120)]
    assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))


def test_singular_covariance_is_an_error():
    rows = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [4.0, 8.0]])
    base = MvBaseline.from_rows(rows)  # rank-1 covariance
    with pytest.raises(ValueError, match="singular"):
        hotelling_t2(np.array([1.0, 1.0]), base)


def test_baseline_preconditions(baseline):
    short = MvBaseline.from_rows(np.eye(3) * 2 + 1)
    with pytest.raises(ValueError, match="n_used > p"):
        hotelling_t2(np.ones(3), short)
    with pytest.raises(ValueError):
        hotelling_t2(np.ones(2), baseline)


def test_expanding_baseline_updates(baseline):
    rng = np.random.default_rng(5)
    obs = rng.multivariate_normal(baseline.mean, baseline.covariance, size=10)
    frozen_records, frozen_base = hotelling_run(obs, baseline)
    assert frozen_base.n_used == baseline.n_used
    expanding = MvBaseline.from_rows(baseline._rows, policy="expanding")
    records, final = hotelling_run(obs, expanding)
    assert final.n_used == baseline.n_used + 10
    # thresholds shrink as n grows
    thresholds = [r.threshold for r in records]
    assert all(a >= b for a, b in zip(thresholds, thresholds[1:]))


def test_simulation_threshold_orders_with_alpha(baseline):
    t_lo = simulation_threshold(baseline, alpha=0.2, n_replicates=199, seed=1)
    t_hi = simulation_threshold(baseline, alpha=0.02, n_replicates=199, seed=1)
    assert t_hi > t_lo > 0


# ---------------------------------------------------------------------------
# Crosier CUSUM
# ---------------------------------------------------------------------------

def test_cusum_zero_increments_stay_zero():
    state = CusumState(s=0.0, k=1.0, c=5.0)
    records, state = crosier_run([0.0] * 10, state)
    assert all(r.statistic_value == 0.0 for r in records)


def test_cusum_drift_exactly_cancelled():
    state = CusumState(s=2.0, k=1.5, c=5.0)
    records, state = crosier_run([1.5] * 8, state)
    assert all(r.statistic_value == pytest.approx(2.0) for r in records)


def test_cusum_first_alarm_time():
    state = CusumState(s=0.0, k=1.0, c=5.0)
    records, _ = crosier_run([2.0] * 10, state)
    alarms = [r.time_index for r in records if r.alarm]
    # S_t = t after t steps of +1 net drift; first S_t > 5 at t = 6 (index 5)
    assert alarms[0] == 5


def test_cusum_never_negative_and_reset_rule():
    state = CusumState(s=3.0, k=1.0, c=10.0)
    state, rec = crosier_cusum(-2.5, state)  # increment -3.5 <= -S
    assert rec.statistic_value == 0.0
    state, rec = crosier_cusum(0.9, state)   # increment -0.1 <= 0 -> stays 0
    assert rec.statistic_value == 0.0
    state, rec = crosier_cusum(1.4, state)
    assert rec.statistic_value == pytest.approx(0.4)


def test_crosier_reference_estimate(baseline):
    k = crosier_reference_from_baseline(baseline)
    # E[T] for a 3-variate Gaussian is around sqrt(p)
    assert 1.0 < k < 3.0


def test_crosier_threshold_calibration(baseline):
    from epidetect.multivariate import calibrate_crosier_threshold
    k = crosier_reference_from_baseline(baseline)
    c = calibrate_crosier_threshold(baseline, k=k, arl0=20.0, n_runs=40,
                                    seed=3)
    assert c > 0
    # a larger target run length needs a larger threshold
    c_long = calibrate_crosier_threshold(baseline, k=k, arl0=80.0, n_runs=40,
                                         seed=3)
    assert c_long > c
