"""Compiled vs pure-Python kernels on the inputs of one coupled run.

    python3 benchmarks/bench_kernels.py [--n 1024] [--repeat 3]

Each kernel is timed on both backends with identical inputs, and the outputs
are checked for bitwise equality.
"""

import argparse
import time

import numpy as np

from mfnc import _backend, kmt, noise
from mfnc.auxiliary_system import coupled_run
from mfnc.model import JumpLaw, ModelParams


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def cases(n):
    p = ModelParams(n_neurons=n)
    run = coupled_run(p, 0)
    cand = run.finite.candidates
    f = p.rate_fn
    key = noise.StreamKey(p.base_seed, 0)
    k0, k1 = key.key_words
    law = JumpLaw()
    lat = kmt.LatticeLaw.from_jump_law(law)
    walk = 1 << 12
    idx = np.concatenate(([0], np.cumsum(lat.index(law.quantile(noise.uniforms(key.with_(purpose="marks"), walk))))))
    tables = lat.ladder(12)
    v = noise.uniforms(key.with_(purpose="coupler_v"), walk)
    grid = p.substep_grid()
    return {
        "uniforms(1e5)": lambda K: K.uniforms(k0, k1, np.arange(100000, dtype=np.uint64), 0, 0, 0),
        "arrivals": lambda K: K.arrivals(k0, k1, 0, 0, np.arange(n), 0, 1, f.f_max, p.horizon),
        "finite_events": lambda K: K.finite_events(cand["time"], cand["neuron"], cand["z"], cand["u"],
                                                   run.finite.x0, p.alpha, 1 / np.sqrt(n), f.code,
                                                   f.f_min, f.f_max, grid, 0),
        "aux_events": lambda K: K.aux_events(cand["time"], cand["neuron"], cand["z"], run.finite.x0,
                                             p.alpha, f.code, f.f_min, f.f_max, run.W.substep_times,
                                             run.W.substep_values,
                                             np.ones(len(run.W.substep_times) - 1, np.uint8)),
        "dyadic_bridge(4096)": lambda K: K.dyadic_bridge(idx, tables, v, 1.0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1024)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    try:
        fast = _backend.get("compiled")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return
    slow = _backend.get("python")
    print(f"N = {args.n}")
    print(f"{'kernel':<22}{'compiled [ms]':>15}{'python [ms]':>14}{'speed-up':>10}  identical")
    for name, fn in cases(args.n).items():
        tf, of = best_of(lambda: fn(fast), args.repeat)
        ts, os_ = best_of(lambda: fn(slow), args.repeat)
        print(f"{name:<22}{tf * 1e3:>15.2f}{ts * 1e3:>14.2f}{ts / tf:>10.1f}  {same(of, os_)}")


if __name__ == "__main__":
    main()
