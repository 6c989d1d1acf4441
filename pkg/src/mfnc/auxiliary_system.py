"""Mean-field auxiliary system driven by the constructed W^N and the shared acceptance noise."""

from dataclasses import dataclass

import numpy as np

from . import finite_system
from ._backend import kernels
from .coupling import build_brownian, couple_interval


@dataclass(frozen=True)
class AuxPath:
    alpha: float
    substep_times: np.ndarray
    substep_w: np.ndarray
    states: np.ndarray  # (n_substeps + 1, N)
    sigmas: np.ndarray  # diffusion coefficient used on each substep
    candidates: dict
    accepted: np.ndarray

    @property
    def event_times(self):
        return self.candidates["time"][self.accepted]

    @property
    def event_neurons(self):
        return self.candidates["neuron"][self.accepted]

    @property
    def events(self):
        """Accepted resets as (time, neuron) pairs."""
        return list(zip(self.event_times.tolist(), self.event_neurons.tolist()))

    def neuron_at(self, i, t, right=True):
        """Value of neuron i at times t, evolved from the last substep with linear W."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        st, sw = self.substep_times, self.substep_w
        if len(st) == 1:
            return np.full_like(t, self.states[0, i])
        g = np.searchsorted(st, t, side="left")
        # a reset exactly on a grid point has probability zero, so grid points read the stored state
        on_grid = (g < len(st)) & (st[np.minimum(g, len(st) - 1)] == t)
        m = np.clip(g - 1, 0, len(st) - 2)
        t0, t1, w0, w1 = st[m], st[m + 1], sw[m], sw[m + 1]
        ws = w0 + (t - t0) / (t1 - t0) * (w1 - w0)
        own = self.event_times[self.event_neurons == i]
        hi = np.searchsorted(own, t, side="right" if right else "left")
        last = own[np.maximum(hi - 1, 0)] if own.size else np.zeros_like(t)
        reset = (hi > 0) & (last > t0)
        wr = w0 + (last - t0) / (t1 - t0) * (w1 - w0)
        sig = self.sigmas[m]
        free = self.states[m, i] * np.exp(-self.alpha * (t - t0)) + sig * (ws - w0)
        out = np.where(reset, sig * (ws - wr), free)
        return np.where(on_grid, self.states[np.minimum(g, len(st) - 1), i], out)


def simulate_aux(params, W, candidates, init):
    """Exponential-integrator run: X <- X e^{-alpha h} + sqrt(mean f(X)) dW on each substep.

    Candidates (shared with the finite system) reset neuron i when z <= f(X^i_{s-}),
    with X^i_{s-} evolved from the last substep to s.
    """
    f = params.rate_fn
    nsub = len(W.substep_times) - 1
    refresh = np.ones(max(nsub, 1), dtype=np.uint8)
    if params.aux_freeze == "interval":
        # sigma is recomputed only on substeps that open a coupling interval
        refresh[:] = np.arange(len(refresh)) % params.substeps_per_delta == 0
    accepted, states, sigmas = kernels.aux_events(
        candidates["time"], candidates["neuron"], candidates["z"], np.asarray(init, dtype=float),
        params.alpha, f.code, f.f_min, f.f_max, W.substep_times, W.substep_values, refresh)
    return AuxPath(params.alpha, W.substep_times, W.substep_values, states, sigmas, candidates, accepted)


@dataclass(frozen=True)
class CoupledRun:
    params: object
    replicate: int
    finite: finite_system.SystemPath
    aux: AuxPath
    W: object
    logs: list
    couplings: list


def coupled_run(params, replicate=0):
    """Finite run, interval couplings, W^N, and the auxiliary run on shared randomness."""
    path, logs = finite_system.simulate(params, replicate)
    couplings = [couple_interval(log, params, replicate) for log in logs]
    W = build_brownian(couplings, params.interval_edges(), params.substeps_per_delta,
                       params.base_seed, replicate)
    aux = simulate_aux(params, W, path.candidates, path.x0)
    return CoupledRun(params, replicate, path, aux, W, logs, couplings)
