import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats as sps

from mfnc import finite_system
from mfnc.auxiliary_system import coupled_run
from mfnc.coupling import (BrownianPath, IntervalCoupling, build_brownian, couple_interval,
                           coupling_error_summary)
from mfnc.finite_system import IntervalLog
from mfnc.model import JumpLaw, ModelParams, RateFunction


def empty_log(k, delta, n=8):
    e = np.empty(0)
    return IntervalLog(k=k, start=k * delta, end=(k + 1) * delta, frozen_values=np.zeros(n),
                       time=e, neuron=np.empty(0, dtype=np.int64), z=e, u=e,
                       live=np.empty(0, dtype=bool), frozen=np.empty(0, dtype=bool))


def test_zero_count_gives_fresh_gaussian():
    p = ModelParams(n_neurons=8, delta=0.2)
    w = []
    for r in range(4000):
        c = couple_interval(empty_log(0, 0.2), p, r)
        assert c.n_frozen == 0 and c.k_stat == 0.0 and c.sup_stat == 0.0
        w.append(c.w_increment)
    assert sps.kstest(np.array(w) / math.sqrt(0.2), "norm").pvalue > 0.01


def test_gaussian_comonotone_zero_k_stat():
    p = ModelParams(n_neurons=64, jump_law=JumpLaw("standard-gaussian"), coupler="comonotone", base_seed=2)
    for r in range(10):
        _, logs = finite_system.simulate(p, r)
        assert all(couple_interval(log, p, r).k_stat == 0.0 for log in logs)


def test_clt_rescaling_with_gaussian_marks():
    p = ModelParams(n_neurons=64, jump_law=JumpLaw("standard-gaussian"), coupler="comonotone",
                    rate_fn=RateFunction("constant", 1.0, 1.0), base_seed=2)
    _, logs = finite_system.simulate(p, 0)
    for log in logs:
        c = couple_interval(log, p, 0)
        marks = log.frozen_marks
        assert c.w_increment == pytest.approx(math.sqrt(log.length / marks.size) * marks.sum(), rel=1e-12)


def test_frozen_count_mean_constant_rate():
    c, n, d = 1.5, 50, 0.05
    p = ModelParams(n_neurons=n, delta=d, horizon=5.0, rate_fn=RateFunction("constant", c, c), base_seed=6)
    counts = []
    r = 0
    while len(counts) < 10_000:
        _, logs = finite_system.simulate(p, r)
        counts += [log.n_frozen for log in logs]
        r += 1
    mean = n * c * d
    assert abs(np.mean(counts) - mean) < 4 * math.sqrt(mean / len(counts))


def test_e_stat_definition():
    p = ModelParams(n_neurons=32, base_seed=1)
    _, logs = finite_system.simulate(p, 0)
    log = logs[0]
    c = couple_interval(log, p, 0)
    fsum = float(np.sum(p.rate_fn(log.frozen_values)))
    assert c.e_stat == pytest.approx(abs(math.sqrt(log.n_frozen / log.length) - math.sqrt(fsum)))
    assert c.k_stat >= 0


def test_regenerated_from_log_alone():
    p = ModelParams(n_neurons=32, base_seed=1)
    run = coupled_run(p, 3)
    for log, c in zip(run.logs, run.couplings):
        assert couple_interval(log, p, 3) == c


def test_full_flags():
    p = ModelParams(n_neurons=256, horizon=1.0)
    run = coupled_run(p, 0)
    assert [c.full for c in run.couplings] == [True, True, False]


# ---------------------------------------------------------------- Brownian assembly

def zero_couplings(k):
    return [IntervalCoupling(j, 0.25, 0, 0.0, 0.0, 0.0, 0.0) for j in range(k)]


def test_zero_increments_pin_endpoints():
    edges = np.arange(5) * 0.25
    W = build_brownian(zero_couplings(4), edges, 4, 1, 0)
    np.testing.assert_array_equal(W.grid_values, 0.0)
    np.testing.assert_array_equal(W.substep_values[::4], 0.0)
    assert np.any(W.substep_values != 0.0)
    np.testing.assert_array_equal(W.substep_times[::4], edges)


def test_grid_values_are_cumulative_increments():
    incs = [0.3, -0.1, 0.25]
    cs = [IntervalCoupling(j, 0.2, 1, w, 0.0, 0.0, 0.0) for j, w in enumerate(incs)]
    W = build_brownian(cs, np.arange(4) * 0.2, 4, 1, 0)
    np.testing.assert_allclose(W.grid_values, np.r_[0, np.cumsum(incs)])
    np.testing.assert_array_equal(W.substep_values[::4], W.grid_values)
    assert W.at(0.2) == W.grid_values[1]
    with pytest.raises(ValueError):
        build_brownian(cs, np.arange(3) * 0.2, 4, 1, 0)


def test_bridge_midpoint_law():
    d, w = 0.4, 0.7
    cs = [IntervalCoupling(0, d, 1, w, 0.0, 0.0, 0.0)]
    mids = np.array([build_brownian(cs, [0.0, d], 2, 5, r).substep_values[1] for r in range(10_000)])
    assert abs(mids.mean() - w / 2) < 4 * math.sqrt(d / 4 / mids.size)
    assert abs(mids.var() - d / 4) < 4 * (d / 4) * math.sqrt(2 / mids.size)


def test_bridge_fill_is_brownian():
    # with m = 4 the filled substep increments of a zero-mean N(0, d) endpoint are N(0, d/4)
    d = 0.4
    inc = []
    for r in range(3000):
        w = math.sqrt(d) * float(sps.norm.ppf((r + 0.5) / 3000))
        W = build_brownian([IntervalCoupling(0, d, 1, w, 0.0, 0.0, 0.0)], [0.0, d], 4, 9, r)
        inc.append(np.diff(W.substep_values))
    inc = np.array(inc)
    for j in range(4):
        assert sps.kstest(inc[:, j] / math.sqrt(d / 4), "norm").pvalue > 0.001


def test_pipeline_grid_increments_normal():
    d = 0.1
    p = ModelParams(n_neurons=32, delta=d, horizon=1.0, base_seed=17)
    inc = []
    for r in range(1000):
        _, logs = finite_system.simulate(p, r)
        inc += [couple_interval(log, p, r).w_increment for log in logs]
    assert len(inc) == 10_000
    assert sps.kstest(np.array(inc) / math.sqrt(d), "norm").pvalue > 0.01


def test_increments_uncorrelated_with_live_counts():
    p = ModelParams(n_neurons=32, delta=0.1, horizon=1.0, base_seed=23)
    w, live = [], []
    for r in range(500):
        run = coupled_run(p, r)
        w += [c.w_increment for c in run.couplings]
        live += [int(log.live.sum()) for log in run.logs]
    assert abs(np.corrcoef(w, live)[0, 1]) < 4 / math.sqrt(len(w))


def test_brownian_path_interpolates():
    W = BrownianPath(0.5, np.array([0.0, 0.5]), np.array([0.0, 1.0]), np.array([0.0, 0.25, 0.5]),
                     np.array([0.0, 0.2, 1.0]))
    assert W.at(0.125) == pytest.approx(0.1)
    assert W.at(0.375) == pytest.approx(0.6)


# ---------------------------------------------------------------- summaries

def test_summary_of_zero_couplings():
    s = coupling_error_summary(zero_couplings(3), 64)
    assert s["k_stat"]["mean"] == 0.0 and s["e_stat"]["mean"] == 0.0 and s["k_term"]["max"] == 0.0
    assert s["intervals"] == 3
    with pytest.raises(ValueError):
        coupling_error_summary([], 64)


def _mean_stat(p, reps, attr):
    vals = []
    for r in range(reps):
        _, logs = finite_system.simulate(p, r)
        vals += [getattr(couple_interval(log, p, r), attr) for log in logs]
    return float(np.mean(vals))


def test_k_stat_log_growth_at_fixed_count():
    # calibration at delta * N = 25.6 gave consecutive ratios 0.94 to 1.04
    means = []
    for e in range(6, 11):
        n = 2**e
        p = ModelParams(n_neurons=n, delta=25.6 / n, horizon=min(1.0, 256 / n), base_seed=31)
        means.append(_mean_stat(p, 60, "k_stat"))
    ratios = np.array(means[1:]) / np.array(means[:-1])
    assert np.all(ratios < 1.6)


def _e_stat_trend(scale):
    ns = [2**e for e in range(6, 13)]
    means = []
    for n in ns:
        p = ModelParams(n_neurons=n, base_seed=31)
        m = _mean_stat(p, 40 if n < 2048 else 15, "e_stat")
        means.append(m * math.sqrt(p.step) if scale else m)
    return sps.linregress(np.log(ns), np.log(means))


@pytest.mark.xfail(strict=True, reason="e_stat grows like 1/(2 sqrt(delta)); see the notes for the analysis")
def test_e_stat_bounded_in_n():
    res = _e_stat_trend(scale=False)
    assert res.slope - 2 * res.stderr <= 0


def test_e_stat_scaled_by_sqrt_delta_has_no_trend():
    res = _e_stat_trend(scale=True)
    assert res.slope - 2 * res.stderr <= 0
