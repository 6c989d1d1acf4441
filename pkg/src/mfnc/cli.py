"""Command-line front end: ``mfnc <command> [--config PATH] [--out DIR] [--jobs K] [--set k=v]``."""

import argparse
import csv
import json
import os
import platform
import sys
import time
from dataclasses import asdict

import numpy as np
import scipy

from . import __version__, _backend, config, finite_system, stats, svg
from .auxiliary_system import coupled_run
from .coupling import coupling_error_summary
from .model import distance_map, validate_assumptions

COMMANDS = ("validate", "simulate-finite", "simulate-coupled", "rate-study", "coupler-bench",
            "remainder-probe", "appendix-checks")

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="mfnc", description="Coupling of a finite neuron network with its mean-field limit.")
    p.add_argument("--version", action="version", version=f"mfnc {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        c = sub.add_parser(name)
        c.add_argument("--config", metavar="PATH", help="TOML configuration file")
        c.add_argument("--out", metavar="DIR", default="out", help="output root (default: out)")
        c.add_argument("--jobs", metavar="K", type=int, default=1, help="worker processes")
        c.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], dest="overrides",
                       help="override a config key (repeatable)")
        c.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True,
                       help="write SVG figures")
    return p


# ---------------------------------------------------------------- output helpers

class Artifacts:
    def __init__(self, root, experiment, cfg):
        self.digest = config.digest(cfg)
        self.dir = os.path.join(root, f"{experiment}-{self.digest}")
        self.experiment = experiment
        os.makedirs(self.dir, exist_ok=True)

    def path(self, name):
        return os.path.join(self.dir, name)

    def json(self, name, obj):
        with open(self.path(name), "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
            fh.write("\n")

    def csv(self, name, header, rows):
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])

    def text(self, name, text):
        with open(self.path(name), "w") as fh:
            fh.write(text)


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _floatify(x):
    if isinstance(x, dict):
        return {k: _floatify(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_floatify(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def manifest(art, cfg, wall, jobs):
    return {"experiment": art.experiment, "config_digest": art.digest, "config": cfg,
            "seed": cfg["seed"], "jobs": jobs, "wall_time_s": round(wall, 3),
            "versions": {"mfnc": __version__, "python": platform.python_version(),
                         "numpy": np.__version__, "scipy": scipy.__version__,
                         "kernels": _backend.name}}


# ---------------------------------------------------------------- commands

def cmd_validate(params, cfg, art, args):
    rep = validate_assumptions(params)
    print(rep)
    art.json("validation.json", rep.as_dict())
    return rep


def cmd_simulate_finite(params, cfg, art, args):
    with open(art.path("events.csv"), "w", newline="") as ev, open(art.path("path.csv"), "w", newline="") as pa:
        for r in range(int(cfg["dump_replicates"])):
            path, logs = finite_system.simulate(params, r)
            finite_system.write_event_log(ev, r, logs, header=(r == 0))
            finite_system.write_path(pa, r, path.grid, path.grid_values, "finite", header=(r == 0))
            print(f"replicate {r}: {int(path.accepted.sum())} spikes, "
                  f"{sum(log.n_frozen for log in logs)} frozen-accepted candidates")


def cmd_simulate_coupled(params, cfg, art, args):
    a = distance_map(params.epsilon)
    rows, summaries = [], []
    with open(art.path("path.csv"), "w", newline="") as pa:
        for r in range(int(cfg["dump_replicates"])):
            run = coupled_run(params, r)
            for c in run.couplings:
                rows.append((r, c.k, c.n_frozen, c.w_increment, c.k_stat, c.e_stat))
            finite_system.write_path(pa, r, run.finite.grid, run.finite.grid_values, "finite", header=(r == 0))
            finite_system.write_path(pa, r, run.aux.substep_times, run.aux.states, "aux", header=False)
            d, mod = stats.sup_distance(run, a, with_modulus=True)
            summaries.append({"replicate": r, "sup_distance": d, "flow_modulus": mod,
                              "remainder": stats.remainder_probe(run, a),
                              "coupling": coupling_error_summary(run.couplings, params.n_neurons, params.epsilon)})
            print(f"replicate {r}: sup distance {d:.6f} (inter-point modulus {mod:.3g})")
    art.csv("intervals.csv", ["replicate", "k", "n_frozen", "w_increment", "k_stat", "e_stat"], rows)
    art.json("summary.json", {"experiment": art.experiment, "config_digest": art.digest,
                              "replicates": _floatify(summaries)})


def cmd_rate_study(params, cfg, art, args):
    R = int(cfg["replicates"])
    ns = [int(n) for n in cfg["n_values"]]
    partial = []

    def persist(rec, rows):
        partial.append(asdict(rec))
        art.json("partial.json", {"experiment": art.experiment, "config_digest": art.digest, "records": partial})
        print(f"N={rec.N}: mean {rec.mean:.5f} [{rec.ci_low:.5f}, {rec.ci_high:.5f}]")

    res = stats.mc_rate_study(params, ns, R, jobs=args.jobs, on_record=persist)
    out = {"experiment": art.experiment, "config_digest": art.digest,
           "records": [asdict(r) for r in res.records],
           "fit": {"slope": res.fit.slope, "slope_ci": res.fit.slope_ci, "c_hat": res.fit.c_hat,
                   "intercept": res.fit.intercept, "degenerate": res.fit.degenerate},
           "checks": {"monotone": res.monotone_ok(), "envelope_at_smallest_N": res.envelope_ok()}}
    art.json("result.json", _floatify(out))
    os.remove(art.path("partial.json"))
    art.csv("records.csv", ["N", "delta", "R", "mean", "std", "ci_low", "ci_high"],
            [tuple(asdict(r).values()) for r in res.records])
    art.csv("replicates.csv", ["N", "replicate", "sup_distance", "flow_modulus", "remainder", "k_stat", "e_stat"],
            [(n, row["replicate"], row["sup_distance"], row["modulus"], row["remainder"], row["k_stat"], row["e_stat"])
             for n, rows in res.per_replicate.items() for row in rows])
    if res.fit.degenerate:
        print("fit degenerate (fewer than 3 N values)")
    else:
        print(f"slope {res.fit.slope:.4f} CI {res.fit.slope_ci}, C-hat {res.fit.c_hat:.4f}")
    if args.plot:
        n = np.array(ns, dtype=float)
        c0 = res.c_hat_at(ns[0])
        series = [("mean sup distance", n, [r.mean for r in res.records], False),
                  ("C (ln N)^(1/5) N^(-1/10)", n, c0 * stats.envelope(n), True)]
        bands = (n, [r.ci_low for r in res.records], [r.ci_high for r in res.records])
        art.text("error_vs_n.svg", svg.loglog(series, "Strong error vs N", "N", "E sup |a(X) - a(X~)|", bands))


def cmd_coupler_bench(params, cfg, art, args):
    methods = list(cfg["bench_methods"])
    ns = [int(n) for n in cfg["bench_n"]]
    R = int(cfg["replicates"])
    rows = stats.coupler_bench(params.jump_law, methods, ns, R, params.base_seed)
    art.csv("sup_stat.csv", ["method", "n", "replicate", "sup_stat"], rows)
    summary = {}
    for m in methods:
        per = {n: np.array([r[3] for r in rows if r[0] == m and r[1] == n]) for n in ns}
        summary[m] = {str(n): {"mean": float(v.mean()), "p99": float(np.percentile(v, 99))} for n, v in per.items()}
        if len(ns) >= 2:
            summary[m]["p99_ratio"] = float(np.percentile(per[ns[-1]], 99) / np.percentile(per[ns[0]], 99))
        print(m, json.dumps(summary[m]))
    art.json("summary.json", {"experiment": art.experiment, "config_digest": art.digest, "methods": summary})
    if args.plot:
        groups = [(f"{m} n={ns[-1]}", [r[3] for r in rows if r[0] == m and r[1] == ns[-1]]) for m in methods]
        art.text("sup_stat_hist.svg", svg.histogram(groups, "KMT sup statistic", "sup |S_m - B_m| / ln(m v 2)"))


def cmd_remainder_probe(params, cfg, art, args):
    R = int(cfg["replicates"])
    out, rows = [], []
    for n in cfg["remainder_n"]:
        reps = stats.run_replicates(params.with_n(int(n)), range(R), args.jobs)
        vals = [r["remainder"] for r in reps]
        m, s, lo, hi = stats.mean_ci(vals)
        out.append({"N": int(n), "R": R, "mean": m, "std": s, "ci_low": lo, "ci_high": hi})
        rows += [(int(n), r["replicate"], r["remainder"]) for r in reps]
        print(f"N={n}: mean |R| {m:.5f} [{lo:.5f}, {hi:.5f}]")
    art.csv("remainder.csv", ["N", "replicate", "remainder"], rows)
    art.json("result.json", {"experiment": art.experiment, "config_digest": art.digest, "records": out})
    if args.plot and len(out) > 1:
        n = [o["N"] for o in out]
        art.text("remainder_vs_n.svg", svg.loglog([("mean |R|", n, [o["mean"] for o in out], False)],
                                                  "Coupling remainder vs N", "N", "E |R|",
                                                  (n, [o["ci_low"] for o in out], [o["ci_high"] for o in out])))


def cmd_appendix_checks(params, cfg, art, args):
    R = int(cfg["replicates"])
    p = params.with_n(int(cfg["increment_n"]))
    inc = stats.increment_bound_check(p, [float(d) for d in cfg["increment_deltas"]], max(2, R // 10))
    print(f"increment slope {inc['slope']:.4f} (means {inc['means']})")
    pois = []
    for n, d in cfg["poisson_cases"]:
        r = stats.poisson_deviation_check(int(cfg["poisson_samples"]), int(n), float(d),
                                          params.rate_fn.f_min, params.rate_fn.f_max, base_seed=params.base_seed)
        r.pop("counts")
        r["below_bound"] = r["empirical"] <= r["bound"]
        pois.append(r)
        print(f"N={n} delta={d}: empirical {r['empirical']:.4g} bound {r['bound']:.4g}")
    art.json("result.json", _floatify({"experiment": art.experiment, "config_digest": art.digest,
                                       "increment": inc, "poisson": pois}))


HANDLERS = {"validate": cmd_validate, "simulate-finite": cmd_simulate_finite,
            "simulate-coupled": cmd_simulate_coupled, "rate-study": cmd_rate_study,
            "coupler-bench": cmd_coupler_bench, "remainder-probe": cmd_remainder_probe,
            "appendix-checks": cmd_appendix_checks}


def run(argv=None):
    """Parse, validate, dispatch; returns the exit code."""
    try:
        args = build_parser().parse_args(argv)
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        cfg = config.load(args.config, args.overrides)
        params = config.to_params(cfg)
    except (UsageError, config.ConfigError, OSError) as exc:
        print(f"mfnc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    rep = validate_assumptions(params)
    art = Artifacts(args.out, args.command, cfg)
    t0 = time.perf_counter()
    if args.command == "validate":
        cmd_validate(params, cfg, art, args)
    elif not rep.ok:
        print(rep, file=sys.stderr)
        print("mfnc: assumption check failed", file=sys.stderr)
    else:
        try:
            HANDLERS[args.command](params, cfg, art, args)
        except (FloatingPointError, OverflowError, ZeroDivisionError) as exc:
            print(f"mfnc: numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
    art.json("manifest.json", manifest(art, cfg, time.perf_counter() - t0, args.jobs))
    return EXIT_OK if rep.ok else EXIT_INVALID


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
