import math
from dataclasses import replace

import numpy as np
import pytest

from mfnc import finite_system, stats
from mfnc.auxiliary_system import coupled_run, simulate_aux
from mfnc.coupling import BrownianPath, build_brownian, couple_interval
from mfnc.model import InitLaw, JumpLaw, ModelParams, RateFunction


def flat_w(t_end, m):
    t = np.linspace(0, t_end, m + 1)
    return BrownianPath(t_end, t[[0, -1]], np.zeros(2), t, np.zeros_like(t))


def no_candidates():
    e = np.empty(0)
    return {"time": e, "neuron": np.empty(0, dtype=np.int64), "z": e, "u": e}


def test_pure_decay():
    p = ModelParams(n_neurons=4, alpha=0.7)
    x0 = np.array([1.0, -0.5, 0.2, 2.0])
    aux = simulate_aux(p, flat_w(1.0, 8), no_candidates(), x0)
    np.testing.assert_allclose(aux.states, np.exp(-0.7 * aux.substep_times)[:, None] * x0, rtol=1e-14)
    np.testing.assert_allclose(aux.neuron_at(3, [0.33]), 2.0 * math.exp(-0.7 * 0.33), rtol=1e-14)


def oracle_constant_rate(p, W, cand, x0, i):
    """Direct recursion for neuron i when f is constant (every candidate is accepted)."""
    c = p.rate_fn.f_max
    st, sw = W.substep_times, W.substep_values
    own = cand["time"][cand["neuron"] == i]
    x = [x0[i]]
    for m in range(len(st) - 1):
        t0, t1 = st[m], st[m + 1]
        hit = own[(own > t0) & (own <= t1)]
        if hit.size:
            s = hit[-1]
            ws = sw[m] + (s - t0) / (t1 - t0) * (sw[m + 1] - sw[m])
            x.append(math.sqrt(c) * (sw[m + 1] - ws))
        else:
            x.append(x[-1] * math.exp(-p.alpha * (t1 - t0)) + math.sqrt(c) * (sw[m + 1] - sw[m]))
    return np.array(x)


def test_constant_rate_matches_recursion():
    p = ModelParams(n_neurons=16, rate_fn=RateFunction("constant", 1.5, 1.5), base_seed=3)
    run = coupled_run(p, 0)
    np.testing.assert_allclose(run.aux.sigmas, math.sqrt(1.5), rtol=1e-15)
    for i in range(4):
        ref = oracle_constant_rate(p, run.W, run.finite.candidates, run.finite.x0, i)
        np.testing.assert_allclose(run.aux.states[:, i], ref, atol=1e-10)


def test_reset_value_is_zero():
    run = coupled_run(ModelParams(n_neurons=32, base_seed=5), 1)
    aux = run.aux
    for s, i in aux.events[:30]:
        assert aux.neuron_at(i, [s], right=True)[0] == 0.0


def test_shared_randomness():
    run = coupled_run(ModelParams(n_neurons=32, base_seed=5), 2)
    for k in ("time", "neuron", "z"):
        np.testing.assert_array_equal(run.aux.candidates[k], run.finite.candidates[k])
    np.testing.assert_array_equal(run.aux.states[0], run.finite.x0)


def test_interval_freeze_toggle():
    p = ModelParams(n_neurons=32, base_seed=5, aux_freeze="interval")
    run = coupled_run(p, 0)
    m = p.substeps_per_delta
    s = run.aux.sigmas.reshape(-1, m)
    np.testing.assert_array_equal(s, s[:, :1].repeat(m, axis=1))
    f = p.rate_fn
    for k in range(s.shape[0]):
        assert s[k, 0] == pytest.approx(math.sqrt(f(run.aux.states[k * m]).mean()), rel=1e-14)


def test_self_convergence():
    # calibration over 200 replicates gave a ratio of 1.58 between successive halvings
    p = ModelParams(n_neurons=64, substeps_per_delta=16, base_seed=4)
    d1, d2 = [], []
    for r in range(200):
        path, logs = finite_system.simulate(p, r)
        cs = [couple_interval(log, p, r) for log in logs]
        W = build_brownian(cs, p.interval_edges(), 16, p.base_seed, r)
        out = {}
        for m in (4, 8, 16):
            s = 16 // m
            Wm = BrownianPath(W.delta, W.grid_times, W.grid_values, W.substep_times[::s], W.substep_values[::s])
            aux = simulate_aux(replace(p, substeps_per_delta=m), Wm, path.candidates, path.x0)
            out[m] = aux.states[:: m // 4, 0]
        d1.append(np.abs(out[4] - out[8]).max())
        d2.append(np.abs(out[8] - out[16]).max())
    ratio = np.mean(d1) / np.mean(d2)
    assert math.sqrt(2) / 1.25 < ratio < 1.5 * math.sqrt(2)


def test_ou_variance_without_resets():
    c, t = 0.5, 1.0
    p = ModelParams(n_neurons=16, delta=0.05, horizon=t, rate_fn=RateFunction("constant", c, c),
                    init_law=InitLaw("point", 0.0), jump_law=JumpLaw("standard-gaussian"),
                    coupler="comonotone", base_seed=19)
    vals = []
    for r in range(3000):
        run = coupled_run(p, r)
        if np.any(run.aux.event_neurons == 0):
            continue
        vals.append(run.aux.states[-1, 0])
    vals = np.array(vals)
    target = c * (1 - math.exp(-2 * t)) / 2
    assert abs(vals.var() - target) < 4 * target * math.sqrt(2 / vals.size)


def test_coupled_run_deterministic():
    p = ModelParams(n_neurons=32, base_seed=8)
    a, b = coupled_run(p, 4), coupled_run(p, 4)
    np.testing.assert_array_equal(a.aux.states, b.aux.states)
    np.testing.assert_array_equal(a.W.substep_values, b.W.substep_values)
    assert a.couplings == b.couplings


def test_zero_horizon():
    run = coupled_run(ModelParams(n_neurons=2, horizon=0.0), 0)
    assert stats.sup_distance(run) == 0.0
    assert stats.remainder_probe(run) == 0.0


@pytest.mark.slow
def test_gaussian_comonotone_beats_independent():
    base = ModelParams(n_neurons=256, jump_law=JumpLaw("standard-gaussian"), base_seed=20240601)
    co = [r["sup_distance"] for r in stats.run_replicates(replace(base, coupler="comonotone"), range(200))]
    ind = [r["sup_distance"] for r in stats.run_replicates(replace(base, coupler="independent"), range(200))]
    assert stats.paired_comparison(co, ind)["verdict"] == "less"
