"""Model ingredients: rate function, jump law, initial law, distance map and parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache, reduce

import numpy as np
from scipy.special import ndtri

from ._pure import RATE_CAUCHY, RATE_CONSTANT, RATE_LOGISTIC

RATE_KINDS = {"constant": RATE_CONSTANT, "cauchy-bump": RATE_CAUCHY, "logistic": RATE_LOGISTIC}
JUMP_KINDS = ("rademacher", "standard-gaussian", "lattice")
INIT_KINDS = ("uniform", "gaussian", "point")

# widest lattice (in steps) accepted as a carrier; finer ones are float artefacts
MAX_LATTICE_SPAN = 4096


@dataclass(frozen=True)
class RateFunction:
    """Bounded spiking rate ``f`` with ``f_min <= f <= f_max``.

    ``cauchy-bump`` is ``f_min + (f_max - f_min) / (1 + x**2)``, ``logistic`` is
    ``f_min + (f_max - f_min) / (1 + exp(-x))`` and ``constant`` is ``f_max``.
    """

    kind: str = "cauchy-bump"
    f_min: float = 1.0
    f_max: float = 2.0

    def __post_init__(self):
        if self.kind not in RATE_KINDS:
            raise ValueError(f"unknown rate kind {self.kind!r}")
        if self.f_max < self.f_min:
            raise ValueError("f_max must be >= f_min")
        if self.kind == "constant" and self.f_min != self.f_max:
            raise ValueError("constant rate needs f_min == f_max")

    @property
    def code(self):
        return RATE_KINDS[self.kind]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        span = self.f_max - self.f_min
        if self.kind == "constant":
            return np.full_like(x, self.f_max)
        if self.kind == "cauchy-bump":
            return self.f_min + span / (1.0 + x * x)
        with np.errstate(over="ignore"):
            return self.f_min + span / (1.0 + np.exp(-x))

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        span = self.f_max - self.f_min
        if self.kind == "constant":
            return np.zeros_like(x)
        if self.kind == "cauchy-bump":
            return -2.0 * span * x / (1.0 + x * x) ** 2
        # logistic'(x) = s (1 - s), written to stay finite for large |x|
        e = np.exp(-np.abs(x))
        return span * e / (1.0 + e) ** 2


@dataclass(frozen=True)
class JumpLaw:
    """Centred jump law of the interaction marks."""

    kind: str = "rademacher"
    support: tuple = ()
    probs: tuple = ()

    def __post_init__(self):
        if self.kind not in JUMP_KINDS:
            raise ValueError(f"unknown jump law {self.kind!r}")
        if self.kind == "rademacher":
            object.__setattr__(self, "support", (-1.0, 1.0))
            object.__setattr__(self, "probs", (0.5, 0.5))
        elif self.kind == "standard-gaussian":
            object.__setattr__(self, "support", ())
            object.__setattr__(self, "probs", ())
        else:
            if len(self.support) != len(self.probs) or not self.support:
                raise ValueError("lattice law needs matching support and probs")
            order = np.argsort(self.support)
            object.__setattr__(self, "support", tuple(float(self.support[i]) for i in order))
            object.__setattr__(self, "probs", tuple(float(self.probs[i]) for i in order))
            if min(self.probs) < 0:
                raise ValueError("negative probability")

    @property
    def is_discrete(self):
        return self.kind != "standard-gaussian"

    def mean(self):
        if not self.is_discrete:
            return 0.0
        return math.fsum(p * x for x, p in zip(self.support, self.probs))

    def variance(self):
        if not self.is_discrete:
            return 1.0
        m = self.mean()
        return math.fsum(p * (x - m) ** 2 for x, p in zip(self.support, self.probs))

    def _cdf_table(self):
        return np.cumsum(self.probs)

    def quantile(self, u):
        """Inverse CDF; CDF steps are left-closed (u below a step maps to the lower atom)."""
        u = np.asarray(u, dtype=float)
        if not self.is_discrete:
            return ndtri(u)
        cdf = self._cdf_table()
        k = np.searchsorted(cdf, u, side="right")
        k = np.minimum(k, len(self.support) - 1)
        return np.asarray(self.support)[k]

    def atom_bounds(self, x):
        """(F(x-), P(X = x), P(X > x)) for atoms x of a discrete law."""
        x = np.asarray(x, dtype=float)
        sup = np.asarray(self.support)
        pr = np.asarray(self.probs)
        k = np.searchsorted(sup, x)
        cdf = np.concatenate([[0.0], np.cumsum(pr)])
        tail = np.concatenate([np.cumsum(pr[::-1])[::-1], [0.0]])
        return cdf[k], pr[k], tail[k + 1]

    def lattice(self):
        """(offset, step, weights) of the smallest uniform lattice carrying the law, or None."""
        if not self.is_discrete:
            return None
        sup = self.support
        if len(sup) == 1:
            return sup[0], 1.0, np.array([1.0])
        diffs = [Fraction(x - sup[0]).limit_denominator(10**6) for x in sup[1:]]
        den = reduce(lambda a, b: a * b // math.gcd(a, b), (d.denominator for d in diffs))
        num = reduce(math.gcd, (int(d * den) for d in diffs))
        step = num / den
        pos = [round((x - sup[0]) / step) for x in sup]
        if pos[-1] > MAX_LATTICE_SPAN:
            return None
        if any(abs(sup[0] + k * step - x) > 1e-9 * max(1.0, abs(x)) for k, x in zip(pos, sup)):
            return None
        w = np.zeros(pos[-1] + 1)
        for k, p in zip(pos, self.probs):
            w[k] += p
        return sup[0], step, w


@dataclass(frozen=True)
class InitLaw:
    """Law of the initial potentials: uniform on [-1, 1], standard gaussian, or a point mass."""

    kind: str = "uniform"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in INIT_KINDS:
            raise ValueError(f"unknown initial law {self.kind!r}")

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "uniform":
            return 2.0 * u - 1.0
        if self.kind == "gaussian":
            return ndtri(u)
        return np.full_like(u, self.value)

    def second_moment(self):
        return {"uniform": 1.0 / 3.0, "gaussian": 1.0, "point": self.value**2}[self.kind]


# psi on [-1, 1]: the even quartic matching |y| to second order at +-1
PSI_COEFFS = (3.0 / 8.0, 3.0 / 4.0, -1.0 / 8.0)
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)
_N_BREAKS = 1024


def psi(y, order=0):
    y = np.asarray(y, dtype=float)
    c0, c2, c4 = PSI_COEFFS
    inner = np.abs(y) < 1.0
    if order == 0:
        return np.where(inner, c0 + c2 * y**2 + c4 * y**4, np.abs(y))
    if order == 1:
        return np.where(inner, 2 * c2 * y + 4 * c4 * y**3, np.sign(y))
    if order == 2:
        return np.where(inner, 2 * c2 + 12 * c4 * y**2, 0.0)
    raise ValueError("psi order must be 0, 1 or 2")


class DistanceMap:
    """Bounded increasing map ``a(x) = int_{-inf}^x (1 + psi(y))**-(1+eps) dy``.

    Tails |x| >= 1 use the closed form ``(1 + |y|)**-(1+eps)`` antiderivative;
    on (-1, 1) a 64-node Gauss-Legendre rule runs on the cell between the
    nearest of 1024 cached breakpoints and x.
    """

    def __init__(self, epsilon=1.0):
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        self.epsilon = float(epsilon)
        self.psi_coeffs = PSI_COEFFS
        self.breaks = np.linspace(-1.0, 1.0, _N_BREAKS + 1)
        width = self.breaks[1] - self.breaks[0]
        mids = 0.5 * (self.breaks[:-1] + self.breaks[1:])
        pts = mids[:, None] + 0.5 * width * _GL_NODES[None, :]
        cells = 0.5 * width * (self._integrand(pts) @ _GL_WEIGHTS)
        self.quad_table = np.concatenate([[0.0], np.cumsum(cells)])
        self.a_at_minus1 = 2.0 ** -self.epsilon / self.epsilon
        self.a_at_1 = self.a_at_minus1 + self.quad_table[-1]
        self.sup = self.a_at_1 + 2.0 ** -self.epsilon / self.epsilon
        self.max_slope = (1.0 + PSI_COEFFS[0]) ** -(1.0 + self.epsilon)

    def _integrand(self, y):
        return (1.0 + psi(y)) ** -(1.0 + self.epsilon)

    def __call__(self, x):
        return self.derivative(x, 0)

    def derivative(self, x, order=0):
        x = np.asarray(x, dtype=float)
        eps = self.epsilon
        if order == 0:
            return self._value(x)
        p = 1.0 + psi(x)
        d1 = psi(x, 1)
        if order == 1:
            return p ** -(1.0 + eps)
        if order == 2:
            return -(1.0 + eps) * p ** -(2.0 + eps) * d1
        if order == 3:
            d2 = psi(x, 2)
            return (1.0 + eps) * (2.0 + eps) * p ** -(3.0 + eps) * d1**2 - (1.0 + eps) * p ** -(2.0 + eps) * d2
        raise ValueError("order must be 0..3")

    def _value(self, x):
        eps = self.epsilon
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        out = np.empty_like(x)
        left = x <= -1.0
        right = x >= 1.0
        mid = ~(left | right)
        out[left] = (1.0 - x[left]) ** -eps / eps
        out[right] = self.a_at_1 + (2.0**-eps - (1.0 + x[right]) ** -eps) / eps
        if mid.any():
            xm = x[mid]
            j = np.clip(np.floor((xm + 1.0) * (_N_BREAKS / 2)).astype(int), 0, _N_BREAKS - 1)
            lo = self.breaks[j]
            half = 0.5 * (xm - lo)
            pts = (lo + half)[:, None] + half[:, None] * _GL_NODES[None, :]
            out[mid] = self.a_at_minus1 + self.quad_table[j] + half * (self._integrand(pts) @ _GL_WEIGHTS)
        return out[0] if scalar else out


@lru_cache(maxsize=8)
def distance_map(epsilon=1.0):
    """Shared DistanceMap per epsilon (construction tabulates the quadrature)."""
    return DistanceMap(epsilon)


def eval_rate(f, x):
    return f(x)


def eval_distance(a, x, order=0):
    return a.derivative(x, order)


def sample_jump(law, u01):
    """One draw of the jump law by inverse transform of ``u01`` in (0, 1)."""
    return law.quantile(u01)


def flow(x, dt, alpha):
    """Exact inter-event decay ``x exp(-alpha dt)``."""
    return np.asarray(x, dtype=float) * np.exp(-alpha * np.asarray(dt, dtype=float))


def default_delta(n):
    return math.log(n) ** 0.8 * n ** -0.4


@dataclass(frozen=True)
class ModelParams:
    alpha: float = 1.0
    n_neurons: int = 256
    rate_fn: RateFunction = field(default_factory=RateFunction)
    jump_law: JumpLaw = field(default_factory=JumpLaw)
    init_law: InitLaw = field(default_factory=InitLaw)
    epsilon: float = 1.0
    horizon: float = 1.0
    delta: float | None = None
    substeps_per_delta: int = 4
    base_seed: int = 20240601
    coupler: str = "dyadic"
    aux_freeze: str = "substep"

    def __post_init__(self):
        if self.n_neurons < 2:
            raise ValueError("n_neurons must be >= 2")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if self.substeps_per_delta < 1:
            raise ValueError("substeps_per_delta must be >= 1")
        d = self.step
        if not 0 < d < 1:
            raise ValueError(f"delta must lie in (0, 1), got {d}")
        if self.coupler not in ("independent", "comonotone", "dyadic"):
            raise ValueError(f"unknown coupler {self.coupler!r}")
        if self.aux_freeze not in ("substep", "interval"):
            raise ValueError(f"unknown aux_freeze {self.aux_freeze!r}")
        if not 0 <= self.base_seed < 2**64:
            raise ValueError("base_seed must fit in 64 bits")

    @property
    def step(self):
        """Coupling grid width: the override if given, else (ln N)**(4/5) N**(-2/5)."""
        return self.delta if self.delta is not None else default_delta(self.n_neurons)

    def with_n(self, n):
        return replace(self, n_neurons=n)

    @property
    def n_intervals(self):
        """Number of coupling intervals needed to cover [0, horizon]."""
        return int(math.ceil(self.horizon / self.step - 1e-9))

    @property
    def n_full_intervals(self):
        return int(math.floor(self.horizon / self.step + 1e-9))

    @property
    def sim_end(self):
        """End of the simulated window: the first grid point at or after the horizon."""
        k = self.n_intervals
        if k == self.n_full_intervals:
            return self.horizon if k else 0.0
        return k * self.step

    def interval_edges(self):
        """Coupling grid 0, delta, ..., sim_end; every interval has full length delta."""
        k = self.n_intervals
        edges = np.arange(k + 1) * self.step
        if k:
            edges[-1] = self.sim_end
        return edges

    def substep_grid(self):
        """Uniform refinement of the coupling grid with substeps_per_delta points per interval."""
        edges = self.interval_edges()
        m = self.substeps_per_delta
        if len(edges) == 1:
            return edges.copy()
        pts = [edges[0]]
        for lo, hi in zip(edges[:-1], edges[1:]):
            pts.extend(lo + (hi - lo) * j / m for j in range(1, m))
            pts.append(hi)
        return np.array(pts)


@dataclass
class Check:
    name: str
    detail: str
    passed: bool


@dataclass
class ValidationReport:
    checks: list

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    def as_dict(self):
        return {"ok": self.ok, "checks": [vars(c) for c in self.checks]}

    def __str__(self):
        lines = [f"[{'pass' if c.passed else 'FAIL'}] {c.name}: {c.detail}" for c in self.checks]
        return "\n".join(lines)


def validate_assumptions(params):
    """Numerical checks of the model assumptions; never raises."""
    checks = []
    law, f, nu0 = params.jump_law, params.rate_fn, params.init_law
    m, v = law.mean(), law.variance()
    mass = math.fsum(law.probs) if law.is_discrete else 1.0
    checks.append(Check(
        "jump law centred, unit variance",
        f"mass={mass:.12g} mean={m:.3g} variance={v:.12g}",
        abs(mass - 1) < 1e-12 and abs(m) < 1e-12 and abs(v - 1) < 1e-12,
    ))
    checks.append(Check(
        "initial law second moment finite",
        f"E[X0^2]={nu0.second_moment():.6g}",
        math.isfinite(nu0.second_moment()),
    ))
    checks.append(Check(
        "rate bounded with inf f > 0",
        f"f_min={f.f_min:g} f_max={f.f_max:g}",
        f.f_min > 0 and math.isfinite(f.f_max),
    ))
    grid = np.concatenate([-np.logspace(3, -3, 400), [0.0], np.logspace(-3, 3, 400)])
    vals = f(grid)
    inside = bool(np.all(vals >= f.f_min - 1e-12) and np.all(vals <= f.f_max + 1e-12))
    weight = np.abs(f.derivative(grid)) * (1.0 + np.abs(grid)) ** (1.0 + params.epsilon)
    c_meas = float(weight.max())
    far = np.abs(grid) >= 100.0
    tail_ok = float(weight[far].max()) <= float(weight[(np.abs(grid) >= 10) & ~far].max()) + 1e-12
    checks.append(Check(
        "rate derivative decay |f'| <= C/(1+|x|)^(1+eps)",
        f"measured C={c_meas:.4g} on |x|<=1e3, range ok={inside}",
        inside and math.isfinite(c_meas) and tail_ok,
    ))
    exp_ok = law.kind in ("rademacher", "standard-gaussian") or (law.kind == "lattice" and bool(law.support))
    checks.append(Check(
        "jump law exponential moments",
        f"{law.kind}: {'bounded support' if law.is_discrete else 'gaussian tails'}",
        exp_ok,
    ))
    return ValidationReport(checks)
