"""Per-interval coupling of frozen small jumps with Gaussian increments, and W^N assembly."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from . import noise
from .kmt import couple_walk
from .model import distance_map

# bridge channels (the neuron slot of the stream key)
CH_FILL, CH_FRESH = 0, 1


@dataclass(frozen=True)
class IntervalCoupling:
    k: int
    length: float
    n_frozen: int
    w_increment: float
    k_stat: float
    e_stat: float
    sup_stat: float
    full: bool = True


@dataclass(frozen=True)
class BrownianPath:
    delta: float
    grid_times: np.ndarray
    grid_values: np.ndarray
    substep_times: np.ndarray
    substep_values: np.ndarray

    def at(self, t):
        """Linear interpolation of the substep values (exact on the substep grid)."""
        return np.interp(t, self.substep_times, self.substep_values)


def couple_interval(log, params, replicate):
    """Couple the frozen marks of one interval with B^k and form W^{N,k}.

    Marks are taken in candidate time order across neurons.  With no frozen
    candidate the increment is a fresh N(0, length) draw from the bridge stream.
    """
    key = noise.StreamKey(params.base_seed, replicate, "coupler_v", interval=log.k)
    marks = log.frozen_marks
    n = marks.size
    length = log.length
    fbar = float(np.sum(params.rate_fn(log.frozen_values)))
    e_stat = abs(math.sqrt(n / length) - math.sqrt(fbar)) if length > 0 else 0.0
    if n == 0:
        z = ndtri(noise.uniform_v(key.with_(purpose="bridge", neuron=CH_FRESH)))
        return IntervalCoupling(log.k, length, 0, math.sqrt(length) * float(z), 0.0, e_stat, 0.0,
                                log.k < params.n_full_intervals)
    wc = couple_walk(marks, key, params.coupler, params.jump_law)
    w = math.sqrt(length / n) * float(wc.B[-1])
    return IntervalCoupling(log.k, length, n, w, wc.k_stat, e_stat, wc.sup_stat,
                            log.k < params.n_full_intervals)


def build_brownian(couplings, edges, m, base_seed, replicate):
    """Concatenate the increments into W^N on the interval edges and bridge-fill m substeps each.

    Substep j of interval k is drawn from the bridge between the previous
    substep value and the interval's end value.
    """
    edges = np.asarray(edges, dtype=float)
    incs = np.array([c.w_increment for c in couplings])
    grid = np.concatenate(([0.0], np.cumsum(incs)))
    if len(grid) != len(edges):
        raise ValueError("one coupling per interval is required")
    sub_t = [edges[0]]
    sub_w = [0.0]
    for k in range(len(incs)):
        t0, t1 = edges[k], edges[k + 1]
        key = noise.StreamKey(base_seed, replicate, "bridge", neuron=CH_FILL, interval=k)
        z = noise.normals(key, m - 1) if m > 1 else ()
        tp, wp = t0, grid[k]
        for j in range(1, m):
            t = t0 + (t1 - t0) * j / m
            frac = (t - tp) / (t1 - tp)
            mean = wp + frac * (grid[k + 1] - wp)
            sd = math.sqrt(max((t - tp) * (t1 - t) / (t1 - tp), 0.0))
            wp = mean + sd * float(z[j - 1])
            tp = t
            sub_t.append(t)
            sub_w.append(wp)
        sub_t.append(t1)
        sub_w.append(grid[k + 1])
    return BrownianPath(delta=float(edges[1] - edges[0]) if len(edges) > 1 else 0.0,
                        grid_times=edges, grid_values=grid,
                        substep_times=np.array(sub_t), substep_values=np.array(sub_w))


def coupling_error_summary(couplings, n_neurons, epsilon=1.0):
    """Aggregates of k_stat and e_stat over the full intervals, with remainder-scaled terms."""
    full = [c for c in couplings if c.full] or list(couplings)
    if not full:
        raise ValueError("no couplings to summarize")
    k = np.array([c.k_stat for c in full])
    e = np.array([c.e_stat for c in full])
    w = np.array([abs(c.w_increment) for c in full])
    a1 = distance_map(epsilon).max_slope
    k_term = k * a1 / math.sqrt(n_neurons)
    e_term = e * w / math.sqrt(n_neurons)

    def agg(x):
        return {"mean": float(x.mean()), "p50": float(np.percentile(x, 50)),
                "p90": float(np.percentile(x, 90)), "max": float(x.max())}

    return {"intervals": len(full), "k_stat": agg(k), "e_stat": agg(e),
            "k_term": agg(k_term), "e_term": agg(e_term),
            "mean_n_frozen": float(np.mean([c.n_frozen for c in full]))}
