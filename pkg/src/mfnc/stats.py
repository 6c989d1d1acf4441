"""Monte Carlo estimators and checks built on coupled runs."""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy import stats as sps

from . import finite_system, noise
from .auxiliary_system import coupled_run
from .coupling import coupling_error_summary
from .kmt import couple_walk
from .model import JumpLaw, distance_map

Z95 = 1.959963984540054


def envelope(n):
    """(ln N)^{1/5} N^{-1/10}."""
    n = np.asarray(n, dtype=float)
    return np.log(n) ** 0.2 * n ** -0.1


def mean_ci(x):
    x = np.asarray(x, dtype=float)
    m = float(x.mean())
    s = float(x.std(ddof=1)) if x.size > 1 else 0.0
    half = Z95 * s / math.sqrt(x.size)
    return m, s, m - half, m + half


# ---------------------------------------------------------------- distances

def evaluation_times(run):
    """Substep grid points and one-sided event times in [0, horizon] where either watched path may jump."""
    fin = run.finite
    t = fin.horizon
    own = run.aux.event_times[run.aux.event_neurons == 0]
    jumps = np.unique(np.concatenate((fin.event_times, own)))
    return fin.grid[fin.grid <= t + 1e-12], jumps[jumps <= t]


def watched_values(run, neuron=0):
    """Values of the watched neuron in both systems on the evaluation set, plus the horizon."""
    grid, jumps = evaluation_times(run)
    fin, aux = run.finite, run.aux
    g = len(grid)
    end = np.array([fin.horizon])
    xg, yg = fin.grid_values[:g, neuron], aux.states[:g, neuron]
    xl, xr = fin.neuron_at(neuron, jumps, right=False), fin.neuron_at(neuron, jumps, right=True)
    yl, yr = aux.neuron_at(neuron, jumps, right=False), aux.neuron_at(neuron, jumps, right=True)
    xe, ye = fin.neuron_at(neuron, end), aux.neuron_at(neuron, end)
    return (np.concatenate((xg, xl, xr, xe)), np.concatenate((yg, yl, yr, ye)),
            np.concatenate((grid, jumps, jumps, end)))


def sup_distance(run, a=None, neuron=0, with_modulus=False):
    """sup |a(X^{N,1}_s) - a(X~^{N,1}_s)| over the substep grid and both limits at jump times.

    The modulus returned with ``with_modulus`` bounds the drift of either path
    between evaluation points by alpha * max|x| * (largest gap).
    """
    a = a or distance_map(1.0)
    x, y, t = watched_values(run, neuron)
    d = float(np.max(np.abs(a(x) - a(y)))) if x.size else 0.0
    if not with_modulus:
        return d
    ts = np.unique(t)
    gap = float(np.max(np.diff(ts))) if ts.size > 1 else 0.0
    scale = float(max(np.max(np.abs(x)), np.max(np.abs(y)))) if x.size else 0.0
    return d, run.finite.alpha * scale * gap


@dataclass
class RemainderProbe:
    values: np.ndarray

    @property
    def mean(self):
        return float(np.mean(self.values))

    @property
    def ci(self):
        return mean_ci(self.values)[2:]


def remainder_probe(run, a=None, neuron=0):
    """|S^N_t - int a'(X^1) sqrt(fbar/N) dW^N - 1/2 int a''(X^1) fbar/N ds| over [0, horizon].

    S^N_t sums a(X^1_{s-} + u/sqrt N) - a(X^1_{s-}) over accepted events of the
    other neurons; the integrals are left-point sums on the substep grid.
    """
    a = a or distance_map(1.0)
    fin = run.finite
    t = fin.horizon
    if t == 0:
        return 0.0
    n = fin.n
    keep = (fin.event_neurons != neuron) & (fin.event_times <= t)
    ts = fin.event_times[keep]
    left = fin.neuron_at(neuron, ts, right=False)
    s_t = float(np.sum(a(left + fin.event_marks[keep] / math.sqrt(n)) - a(left)))
    # left-point sums over the substeps, the last one cut at the horizon
    st = run.W.substep_times
    k = int(np.searchsorted(st, t - 1e-12, side="left"))
    times = np.append(st[:k], t)
    w = np.append(run.W.substep_values[:k], run.W.at(t))
    g = fin.grid_values[:k]
    x1 = g[:, neuron]
    fmean = run.params.rate_fn(g).mean(axis=1)
    ito = float(np.sum(a.derivative(x1, 1) * np.sqrt(fmean) * np.diff(w)))
    drift = 0.5 * float(np.sum(a.derivative(x1, 2) * fmean * np.diff(times)))
    return abs(s_t - ito - drift)


# ---------------------------------------------------------------- rate study

def _replicate_task(args):
    params, r = args
    run = coupled_run(params, r)
    a = distance_map(params.epsilon)
    d, mod = sup_distance(run, a, with_modulus=True)
    summ = coupling_error_summary(run.couplings, params.n_neurons, params.epsilon)
    return {"replicate": r, "sup_distance": d, "modulus": mod,
            "remainder": remainder_probe(run, a),
            "k_stat": summ["k_stat"]["mean"], "e_stat": summ["e_stat"]["mean"],
            "n_frozen": summ["mean_n_frozen"]}


def run_replicates(params, replicates, jobs=1):
    """Per-replicate diagnostics in replicate order, identical for any ``jobs``."""
    tasks = [(params, r) for r in replicates]
    if jobs <= 1:
        return [_replicate_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_replicate_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


@dataclass
class RateRecord:
    N: int
    delta: float
    R: int
    mean: float
    std: float
    ci_low: float
    ci_high: float


@dataclass
class RateFit:
    slope: float | None
    slope_ci: list | None
    intercept: float | None
    c_hat: float
    degenerate: bool = False


@dataclass
class RateStudyResult:
    records: list
    fit: RateFit
    per_replicate: dict = field(default_factory=dict, repr=False)

    def c_hat_at(self, n):
        rec = next(r for r in self.records if r.N == n)
        return rec.mean / float(envelope(n))

    def envelope_ok(self, calibrate_at=None):
        """error(N) <= C * envelope(N) for every N, with C calibrated at the smallest N."""
        n0 = calibrate_at or min(r.N for r in self.records)
        c = self.c_hat_at(n0)
        return all(r.mean <= c * float(envelope(r.N)) * (1 + 1e-12) for r in self.records)

    def monotone_ok(self):
        """Mean error non-increasing in N, allowing overlapping confidence intervals."""
        recs = sorted(self.records, key=lambda r: r.N)
        return all(b.mean <= a.mean or b.ci_low <= a.ci_high for a, b in zip(recs, recs[1:]))

    def as_dict(self):
        return {"records": [asdict(r) for r in self.records], "fit": asdict(self.fit)}


def fit_rate(points):
    """OLS of ln(error) on ln(N); C-hat is the largest ratio to the envelope.

    ``points`` is a sequence of (N, error) pairs with at least three entries.
    """
    pts = sorted(points)
    if len(pts) < 3:
        raise ValueError("fit_rate needs at least 3 points")
    n = np.array([p[0] for p in pts], dtype=float)
    e = np.array([p[1] for p in pts], dtype=float)
    res = sps.linregress(np.log(n), np.log(e))
    tq = sps.t.ppf(0.975, len(pts) - 2)
    slope = float(res.slope)
    se = float(res.stderr)
    c_hat = float(np.max(e / envelope(n)))
    return RateFit(slope, [slope - tq * se, slope + tq * se], float(res.intercept), c_hat)


def mc_rate_study(params, n_values, replicates, jobs=1, on_record=None):
    """R coupled runs per N; returns per-N records and the log-log fit.

    ``on_record(record, rows)`` is called after each N completes, so partial
    results can be persisted.
    """
    if replicates < 2:
        raise ValueError("need at least 2 replicates")
    records, per = [], {}
    for n in n_values:
        p = params.with_n(n)
        rows = run_replicates(p, range(replicates), jobs)
        m, s, lo, hi = mean_ci([r["sup_distance"] for r in rows])
        rec = RateRecord(n, p.step, replicates, m, s, lo, hi)
        records.append(rec)
        per[n] = rows
        if on_record is not None:
            on_record(rec, rows)
    try:
        fit = fit_rate([(r.N, r.mean) for r in records])
    except ValueError:
        c = max(r.mean / float(envelope(r.N)) for r in records)
        fit = RateFit(None, None, None, c, degenerate=True)
    return RateStudyResult(records, fit, per)


def paired_comparison(x, y, sigmas=4.0):
    """Paired test of mean(x) against mean(y): 'less', 'greater' or 'indistinguishable'."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    m = float(d.mean())
    se = float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else float("inf")
    z = m / se if se > 0 else (0.0 if m == 0 else math.copysign(float("inf"), m))
    verdict = "less" if z < -sigmas else "greater" if z > sigmas else "indistinguishable"
    return {"mean_diff": m, "se": se, "z": z, "verdict": verdict}


# ---------------------------------------------------------------- KMT bench

def coupler_bench(law, methods, ns, replicates, base_seed):
    """sup_stat of each coupler on shared walks; rows (method, n, replicate, sup_stat)."""
    rows = []
    for n in ns:
        for r in range(replicates):
            key = noise.StreamKey(base_seed, r, "marks", interval=0)
            U = np.asarray(law.quantile(noise.uniforms(key, n)), dtype=float)
            for meth in methods:
                wc = couple_walk(U, key, meth, law)
                rows.append((meth, n, r, wc.sup_stat))
    return rows


# ---------------------------------------------------------------- increment and deviation checks

def h_function(x):
    """h(x) = (1 + x) ln(1 + x) - x."""
    return (1.0 + x) * math.log1p(x) - x


def poisson_deviation_check(n_samples, N, delta, f_min, f_max, c=None, base_seed=1, replicate=0):
    """Empirical P(N_delta <= N f_min delta / 2) under constant rate c, against 2 exp(-t h(eps/t)).

    Frozen counts are the candidates with z <= c in consecutive intervals of
    width delta, from the same streams the systems use.
    """
    c = f_min if c is None else c
    key = noise.StreamKey(base_seed, replicate)
    t_end = n_samples * delta
    tab = noise.candidate_table(key, np.arange(N), 0.0, t_end, f_max, JumpLaw())
    times = tab["time"][tab["z"] <= c]
    k = np.minimum((times / delta).astype(np.int64), n_samples - 1)
    counts = np.bincount(k, minlength=n_samples)
    thresh = N * f_min * delta / 2.0
    t = f_max * N * delta
    x = thresh / t
    bound = 2.0 * math.exp(-t * h_function(x))
    emp = float(np.mean(counts <= thresh))
    return {"N": N, "delta": delta, "N_delta": N * delta, "c": c, "threshold": thresh,
            "x": x, "h": h_function(x), "empirical": emp, "bound": bound,
            "mean_count": float(counts.mean()), "counts": counts}


def increment_bound_check(params, deltas, replicates, base_seed=None):
    """OLS slope of ln E|X_{tau(s)} - X_s| on ln delta, at s = tau(s) + delta-.

    The expectation is averaged over replicates, full intervals and all neurons
    (exchangeable, so each neuron estimates the same mean).
    """
    means = []
    for d in deltas:
        p = replace(params, delta=d, base_seed=params.base_seed if base_seed is None else base_seed)
        edges = p.interval_edges()[: p.n_full_intervals + 1]
        acc = []
        for r in range(replicates):
            path, _ = finite_system.simulate(p, r)
            start = np.searchsorted(path.grid, edges[:-1])
            xs = path.grid_values[start]
            xe = np.stack([path.neuron_at(i, edges[1:], right=False) for i in range(p.n_neurons)], axis=1)
            acc.append(np.abs(xe - xs).mean())
        means.append(float(np.mean(acc)))
    if len(deltas) < 2:
        return {"deltas": list(deltas), "means": means, "slope": None, "slope_se": None}
    res = sps.linregress(np.log(deltas), np.log(means))
    return {"deltas": list(deltas), "means": means, "slope": float(res.slope),
            "slope_se": float(res.stderr)}
