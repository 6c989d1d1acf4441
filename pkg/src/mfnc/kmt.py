"""Couplers G(S, V) of a centred random walk with a Brownian motion at integer times."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import ndtri

from . import noise
from ._backend import kernels

METHODS = ("independent", "comonotone", "dyadic")

# coupler_v channels (the neuron slot of the stream key)
CH_DYADIC, CH_PAD, CH_INDEP, CH_COMONO = 0, 1, 2, 3

# largest lattice table the dyadic coupler may build
TABLE_CAP = 1 << 22
_FFT_MIN = 512


@dataclass(frozen=True)
class WalkCoupling:
    n: int
    U: np.ndarray
    S: np.ndarray  # S_0..S_n
    B: np.ndarray  # B_0..B_n
    sup_stat: float

    @property
    def k_stat(self):
        """|S_n - B_n| at the final time."""
        return float(abs(self.S[-1] - self.B[-1]))


class LatticeLaw:
    """A law on offset + step * {0..K-1} with its 2**l-fold convolution ladder."""

    def __init__(self, offset, step, weights, cap=TABLE_CAP):
        w = np.asarray(weights, dtype=float)
        if w.ndim != 1 or len(w) == 0 or np.any(w < 0):
            raise ValueError("weights must be a non-empty non-negative vector")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        self.offset = float(offset)
        self.step = float(step)
        self.weights = w
        self.cap = cap
        self._ladder = [w]

    @classmethod
    def from_jump_law(cls, law, cap=TABLE_CAP):
        lat = law.lattice()
        if lat is None:
            raise ValueError(f"jump law {law.kind!r} has no lattice carrier")
        off, step, w = lat
        return cls(off, step, w, cap)

    def table(self, level):
        """pmf of the sum of 2**level marks on offset * 2**level + step * {0..}."""
        while len(self._ladder) <= level:
            prev = self._ladder[-1]
            size = 2 * len(prev) - 1
            if size > self.cap:
                raise OverflowError(f"lattice table of size {size} exceeds cap {self.cap}")
            nxt = fftconvolve(prev, prev) if len(prev) >= _FFT_MIN else np.convolve(prev, prev)
            nxt = np.clip(nxt, 0.0, None)
            self._ladder.append(nxt / nxt.sum())
        return self._ladder[level]

    def ladder(self, level):
        return [self.table(lev) for lev in range(level + 1)]

    def index(self, marks):
        """Lattice indices of marks (exact for lattice-valued input)."""
        return np.rint((np.asarray(marks, dtype=float) - self.offset) / self.step).astype(np.int64)

    def support(self, level):
        m = 1 << level
        return m * self.offset + self.step * np.arange(len(self.table(level)))


@lru_cache(maxsize=None)
def _lattice_for(law):
    return LatticeLaw.from_jump_law(law)


def convolve_law(nu, n):
    """Lattice law of S_n for n a power of two, as (support, pmf)."""
    if n < 1 or n & (n - 1):
        raise ValueError("n must be a power of two")
    lat = _lattice_for(nu)
    level = n.bit_length() - 1
    return lat.support(level), lat.table(level)


def kmt_sup_stat(S, B):
    """max_m |S_m - B_m| / ln(m v 2) over m = 1..len, 0 when empty.

    S and B are indexed from m = 1 (no leading zero).
    """
    S = np.asarray(S, dtype=float)
    B = np.asarray(B, dtype=float)
    if S.shape != B.shape:
        raise ValueError("S and B must have equal lengths")
    if S.size == 0:
        return 0.0
    m = np.arange(1, S.size + 1)
    return float(np.max(np.abs(S - B) / np.log(np.maximum(m, 2))))


def _randomized_cdf(law, u, v):
    """F(u-) + v * P(u): uniform on (0, 1) when v is uniform, for atoms or not."""
    lo, p, _ = law.atom_bounds(u)
    return lo + v * p


def _split_quantile(below, atom, above, v):
    """Standard-normal quantile of below + v * atom, computed from the nearer tail."""
    tot = below + atom + above
    lo = (below + v * atom) / tot
    hi = (above + (1.0 - v) * atom) / tot
    return np.where(lo < 0.5, ndtri(np.minimum(lo, 0.5)), -ndtri(np.minimum(hi, 0.5)))


def couple_walk(U, key, method, law):
    """Couple the walk of marks U (law ``law``) with a Brownian motion sampled at 1..n.

    ``key`` is the coupler's own StreamKey; its ``neuron`` slot is used as channel.
    """
    if method not in METHODS:
        raise ValueError(f"unknown coupling method {method!r}")
    U = np.asarray(U, dtype=float)
    n = U.size
    S = np.concatenate(([0.0], np.cumsum(U)))
    if n == 0:
        return WalkCoupling(0, U, S, np.zeros(1), 0.0)
    key = key.with_(purpose="coupler_v")
    if method == "independent":
        dB = noise.normals(key.with_(neuron=CH_INDEP), n)
    elif method == "comonotone" or law.kind == "standard-gaussian":
        if law.kind == "standard-gaussian":
            dB = U.copy()  # quantile coupling of a law with itself
        else:
            v = noise.uniforms(key.with_(neuron=CH_COMONO), n)
            lo, p, tail = law.atom_bounds(U)
            dB = _split_quantile(lo, p, tail, v)
    else:
        dB = None
    if dB is not None:
        B = np.concatenate(([0.0], np.cumsum(dB)))
    else:
        B = _dyadic(U, key, law)
    return WalkCoupling(n, U, S, B, kmt_sup_stat(S[1:], B[1:]))


def _dyadic(U, key, law):
    n = U.size
    lat = _lattice_for(law)
    M = (n - 1).bit_length()
    size = 1 << M
    marks = U
    if size > n:
        pad = law.quantile(noise.uniforms(key.with_(neuron=CH_PAD), size - n))
        marks = np.concatenate((U, np.asarray(pad, dtype=float)))
    idx = np.concatenate(([0], np.cumsum(lat.index(marks))))
    tables = lat.ladder(M)
    v = noise.uniforms(key.with_(neuron=CH_DYADIC), size)
    top = tables[M]
    s = int(idx[-1])
    below = float(top[:s].sum())
    above = float(top[s + 1:].sum())
    z = float(_split_quantile(below, float(top[s]), above, v[0]))
    b_top = np.sqrt(size) * z
    b = kernels.dyadic_bridge(idx, tables, v, b_top)
    return np.asarray(b[: n + 1])
