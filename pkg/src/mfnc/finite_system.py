"""Exact event-driven simulation of the N-neuron system.

Between events every potential decays as x e^{-alpha t}.  The state of neuron
i is stored as y(t) + c_i e^{-alpha (t - r_i)}: y is the decayed sum of all
kicks and (r_i, c_i) the last reset of i, so a run costs O(1) per candidate.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import noise
from ._backend import kernels


@dataclass(frozen=True)
class IntervalLog:
    """Candidates of the coupling interval (start, end] with live and frozen acceptance flags."""

    k: int
    start: float
    end: float
    frozen_values: np.ndarray  # X^N at the interval start (right limit)
    time: np.ndarray
    neuron: np.ndarray
    z: np.ndarray
    u: np.ndarray
    live: np.ndarray
    frozen: np.ndarray

    @property
    def n_frozen(self):
        return int(self.frozen.sum())

    @property
    def length(self):
        return self.end - self.start

    @property
    def frozen_marks(self):
        """Marks of frozen-accepted candidates, in candidate time order."""
        return self.u[self.frozen]


@dataclass(frozen=True)
class SystemPath:
    """Piecewise-exact trajectory of one finite system, plus its candidate table."""

    alpha: float
    horizon: float  # observation horizon
    t_end: float  # end of the simulated window (>= horizon)
    n: int
    x0: np.ndarray
    candidates: dict  # time, neuron, z, u for every candidate on (0, t_end]
    accepted: np.ndarray  # mask over candidates
    y_post: np.ndarray  # kick sum right after each candidate (valid where accepted)
    grid: np.ndarray
    grid_values: np.ndarray  # (len(grid), n) right limits on the grid
    _restart: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def event_times(self):
        return self.candidates["time"][self.accepted]

    @property
    def event_neurons(self):
        return self.candidates["neuron"][self.accepted]

    @property
    def event_marks(self):
        return self.candidates["u"][self.accepted]

    @property
    def events(self):
        """Accepted events as (time, spiker, mark) tuples."""
        return list(zip(self.event_times.tolist(), self.event_neurons.tolist(), self.event_marks.tolist()))

    def _kick_sum(self):
        return self.y_post[self.accepted]

    def _restarts(self, i):
        """Reset times r and constants c of neuron i, starting with (0, x0_i)."""
        if i not in self._restart:
            own = self.event_neurons == i
            r = np.concatenate(([0.0], self.event_times[own]))
            c = np.concatenate(([self.x0[i]], -self._kick_sum()[own]))
            self._restart[i] = (r, c)
        return self._restart[i]

    def neuron_at(self, i, t, right=True):
        """Potential of neuron i at times t; right or left limits at event times."""
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.t_end + 1e-12):
            raise ValueError("time outside the simulated window")
        side = "right" if right else "left"
        et = self.event_times
        e = np.searchsorted(et, t, side=side) - 1
        ys = np.append(self._kick_sum(), 0.0)  # sentinel keeps the lookup valid with no events
        ts = np.append(et, 0.0)
        y = np.where(e >= 0, ys[np.maximum(e, 0)], 0.0)
        ty = np.where(e >= 0, ts[np.maximum(e, 0)], 0.0)
        r, c = self._restarts(i)
        j = np.searchsorted(r[1:], t, side=side)
        return y * np.exp(-self.alpha * (t - ty)) + c[j] * np.exp(-self.alpha * (t - r[j]))

    def state_at(self, t, right=False):
        """Vector of all N potentials at time t (left limit unless ``right``)."""
        return np.array([float(self.neuron_at(i, t, right)) for i in range(self.n)])

    def segment_starts(self, i):
        """(time, value) pairs where neuron i's exponential segment restarts.

        Every accepted event restarts the segment of i (reset or kick).
        """
        t = np.concatenate(([0.0], self.event_times))
        v = np.concatenate(([self.x0[i]], self.neuron_at(i, self.event_times, right=True)))
        return list(zip(t.tolist(), v.tolist()))


def stream_key(params, replicate):
    return noise.StreamKey(params.base_seed, replicate)


def draw_shared(params, replicate):
    """Initial values and candidate table shared by the finite and auxiliary systems."""
    key = stream_key(params, replicate)
    x0 = noise.initial_values(key, params.n_neurons, params.init_law)
    cand = noise.candidate_table(key, np.arange(params.n_neurons), 0.0, params.sim_end,
                                 params.rate_fn.f_max, params.jump_law)
    return x0, cand


def run_events(params, x0, cand, snap_times, watch=0):
    f = params.rate_fn
    return kernels.finite_events(cand["time"], cand["neuron"], cand["z"], cand["u"], x0,
                                 params.alpha, 1.0 / np.sqrt(params.n_neurons),
                                 f.code, f.f_min, f.f_max, np.asarray(snap_times, dtype=float), watch)


def interval_logs(params, path):
    """Split the candidates into coupling intervals (t_k, t_{k+1}] with frozen flags."""
    edges = params.interval_edges()
    cand = path.candidates
    f = params.rate_fn
    grid = path.grid
    logs = []
    bounds = np.searchsorted(cand["time"], edges, side="right")
    for k in range(len(edges) - 1):
        g = int(np.searchsorted(grid, edges[k]))
        if not np.isclose(grid[g], edges[k]):
            raise RuntimeError("interval edge missing from the snapshot grid")
        snap = path.grid_values[g]
        sl = slice(bounds[k], bounds[k + 1])
        who = cand["neuron"][sl]
        z = cand["z"][sl]
        logs.append(IntervalLog(
            k=k, start=float(edges[k]), end=float(edges[k + 1]), frozen_values=snap,
            time=cand["time"][sl], neuron=who, z=z, u=cand["u"][sl],
            live=path.accepted[sl], frozen=z <= f(snap[who])))
    return logs


def simulate(params, replicate=0):
    """Exact run of the finite system; returns (SystemPath, list of IntervalLog)."""
    x0, cand = draw_shared(params, replicate)
    grid = params.substep_grid()
    accepted, y_post, _, snaps = run_events(params, x0, cand, grid)
    path = SystemPath(alpha=params.alpha, horizon=params.horizon, t_end=params.sim_end,
                      n=params.n_neurons, x0=x0,
                      candidates=cand, accepted=accepted, y_post=y_post, grid=grid, grid_values=snaps)
    return path, interval_logs(params, path)


def write_event_log(fh, replicate, logs, header=True):
    """CSV of every candidate: replicate, neuron, time, z, u, accepted_live, accepted_frozen."""
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(["replicate", "neuron", "time", "z", "u", "accepted_live", "accepted_frozen"])
    for log in logs:
        for row in zip(log.neuron.tolist(), log.time.tolist(), log.z.tolist(), log.u.tolist(),
                       log.live.tolist(), log.frozen.tolist()):
            w.writerow([replicate, row[0], repr(row[1]), repr(row[2]), repr(row[3]), int(row[4]), int(row[5])])


def write_path(fh, replicate, grid, values, system="finite", header=True):
    """CSV of substep-grid values: replicate, system, neuron, grid_time, value."""
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow(["replicate", "system", "neuron", "grid_time", "value"])
    for g, t in enumerate(grid.tolist()):
        for i, v in enumerate(values[g].tolist()):
            w.writerow([replicate, system, i, repr(t), repr(v)])
