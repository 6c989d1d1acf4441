"""Counter-based random streams.

Every draw is Philox4x32-10 evaluated at a counter built from
``(draw, neuron, purpose|interval, replicate)`` under a key taken from the
64-bit base seed, so any stream can be regenerated on its own without
replaying earlier ones.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import ndtri

from ._backend import kernels

PURPOSES = ("candidates", "acceptance", "marks", "coupler_v", "bridge", "init")
_PURPOSE_CODE = {p: i for i, p in enumerate(PURPOSES)}
_INTERVAL_BITS = 24

# candidate arrivals are generated on unit time blocks, independent of the coupling grid
BLOCK = 1.0


@dataclass(frozen=True)
class StreamKey:
    base_seed: int
    replicate: int = 0
    purpose: str = "candidates"
    neuron: int = 0
    interval: int = 0

    def __post_init__(self):
        if self.purpose not in _PURPOSE_CODE:
            raise ValueError(f"unknown purpose {self.purpose!r}")
        if not 0 <= self.interval < 2**_INTERVAL_BITS:
            raise ValueError("interval index out of range")
        if not 0 <= self.replicate < 2**32 or not 0 <= self.neuron < 2**32:
            raise ValueError("replicate and neuron must fit in 32 bits")

    @property
    def key_words(self):
        return self.base_seed & 0xFFFFFFFF, (self.base_seed >> 32) & 0xFFFFFFFF

    @property
    def purpose_word(self):
        return _PURPOSE_CODE[self.purpose] << _INTERVAL_BITS

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class CandidateEvent:
    time: float
    neuron: int
    z: float
    u: float


def uniforms(key, n, start=0):
    """Draws start..start+n-1 of the stream ``key`` as uniforms in (0, 1)."""
    k0, k1 = key.key_words
    idx = np.arange(start, start + n, dtype=np.uint64)
    return kernels.uniforms(k0, k1, idx, key.neuron, key.purpose_word | key.interval, key.replicate)


def uniforms_at(key, neurons, intervals, draws, purpose=None):
    """Vectorized draws for arrays of (neuron, interval, draw) under ``key``'s seed and replicate."""
    key = key if purpose is None else key.with_(purpose=purpose)
    k0, k1 = key.key_words
    word = np.uint64(key.purpose_word) | np.asarray(intervals, dtype=np.uint64)
    return kernels.uniforms(k0, k1, np.asarray(draws, dtype=np.uint64),
                            np.asarray(neurons, dtype=np.uint64), word, key.replicate)


def normals(key, n, start=0):
    return ndtri(uniforms(key, n, start))


def uniform_v(key):
    """The single uniform attached to ``key`` (draw 0)."""
    return float(uniforms(key, 1)[0])


def candidate_table(key, neurons, t0, t1, f_max, law):
    """Dominating Poisson(f_max) candidates of ``neurons`` on [t0, t1), sorted by (time, neuron).

    Returns a dict of arrays: time, neuron, z (uniform on (0, f_max)), u (mark from ``law``).
    Arrival j of neuron i in block b uses draw j of the candidates, acceptance and
    marks streams keyed by (i, b), so the marks ride on every candidate.
    """
    neurons = np.asarray(neurons, dtype=np.int64)
    k0, k1 = key.key_words
    if t1 <= t0 or len(neurons) == 0:
        empty = np.empty(0)
        return {"time": empty, "neuron": np.empty(0, dtype=np.int64), "z": empty, "u": empty}
    b_lo = int(np.floor(t0 / BLOCK))
    b_hi = int(np.ceil(t1 / BLOCK))
    cand = key.with_(purpose="candidates")
    times, who, blk, drw = kernels.arrivals(k0, k1, key.replicate, cand.purpose_word,
                                            neurons, b_lo, b_hi, f_max / BLOCK, t1)
    keep = times >= t0
    times, who, blk, drw = times[keep], who[keep], blk[keep], drw[keep]
    order = np.lexsort((who, times))
    times, who, blk, drw = times[order], who[order], blk[order], drw[order]
    z = f_max * uniforms_at(key, who, blk, drw, purpose="acceptance")
    u = law.quantile(uniforms_at(key, who, blk, drw, purpose="marks"))
    return {"time": times, "neuron": who, "z": z, "u": np.asarray(u, dtype=float)}


def candidates_in(key, neuron, window, f_max, law):
    """Ordered CandidateEvents of one neuron on the window [t0, t1)."""
    t0, t1 = window
    tab = candidate_table(key, [neuron], t0, t1, f_max, law)
    return [CandidateEvent(float(t), int(i), float(z), float(u))
            for t, i, z, u in zip(tab["time"], tab["neuron"], tab["z"], tab["u"])]


def initial_values(key, n, init_law):
    """X_0^i for i < n, one uniform per neuron from the init stream."""
    k0, k1 = key.key_words
    init = key.with_(purpose="init")
    u = kernels.uniforms(k0, k1, 0, np.arange(n, dtype=np.uint64), init.purpose_word, key.replicate)
    return np.asarray(init_law.quantile(u), dtype=float)
