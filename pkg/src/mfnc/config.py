"""TOML configuration: parsing, overrides, canonical digest, and ModelParams construction."""

import copy
import hashlib
import json
import os
import sys
from importlib import resources

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import InitLaw, JumpLaw, ModelParams, RateFunction

MODEL_KEYS = {"alpha", "n_neurons", "horizon", "epsilon", "delta", "substeps_per_delta", "seed",
              "coupler", "aux_freeze"}
TABLES = {"f": {"kind", "min", "max"}, "nu": {"kind", "support", "probs"}, "nu0": {"kind", "value"}}
EXPERIMENT_KEYS = {"replicates", "n_values", "bench_n", "bench_methods", "increment_deltas",
                   "increment_n", "poisson_cases", "poisson_samples", "remainder_n",
                   "dump_replicates", "hierarchy_n"}


class ConfigError(ValueError):
    pass


def default_text():
    return resources.files("mfnc").joinpath("default_config.toml").read_text()


def default_config():
    return tomllib.loads(default_text())


def check_keys(cfg):
    for k, v in cfg.items():
        if k in TABLES:
            if not isinstance(v, dict):
                raise ConfigError(f"[{k}] must be a table")
            bad = set(v) - TABLES[k]
            if bad:
                raise ConfigError(f"unknown keys in [{k}]: {sorted(bad)}")
        elif k not in MODEL_KEYS | EXPERIMENT_KEYS:
            raise ConfigError(f"unknown config key {k!r}")


def load(path=None, overrides=(), env=None):
    """Defaults, then the file at ``path``, then ``key=value`` overrides, then MFNC_SEED."""
    cfg = default_config()
    if path is not None:
        with open(path, "rb") as fh:
            try:
                user = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"cannot parse {path}: {exc}") from None
        check_keys(user)
        merge(cfg, user)
    for item in overrides:
        apply_override(cfg, item)
    env = os.environ if env is None else env
    if env.get("MFNC_SEED"):
        try:
            cfg["seed"] = int(env["MFNC_SEED"])
        except ValueError:
            raise ConfigError("MFNC_SEED must be an integer") from None
    check_keys(cfg)
    return cfg


def merge(base, extra):
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            # a new kind replaces the whole table so stale fields do not leak
            if "kind" in v and v["kind"] != base[k].get("kind"):
                base[k] = {}
            base[k].update(v)
        else:
            base[k] = v


def apply_override(cfg, item):
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    if "." in key:
        table, sub = key.split(".", 1)
        if table not in TABLES or sub not in TABLES[table]:
            raise ConfigError(f"unknown config key {key!r}")
        merge(cfg, {table: {sub: value}})
    else:
        if key not in MODEL_KEYS | EXPERIMENT_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        cfg[key] = value


def canonical(cfg):
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def digest(cfg):
    return hashlib.sha256(canonical(cfg).encode()).hexdigest()[:12]


def to_params(cfg):
    """ModelParams from a config dict; raises ConfigError on malformed values."""
    c = copy.deepcopy(cfg)
    try:
        f = RateFunction(c["f"]["kind"], float(c["f"]["min"]), float(c["f"]["max"]))
        nu = c["nu"]
        law = JumpLaw(nu["kind"], tuple(nu.get("support", ())), tuple(nu.get("probs", ())))
        init = InitLaw(c["nu0"]["kind"], float(c["nu0"].get("value", 0.0)))
        delta = c.get("delta")
        return ModelParams(
            alpha=float(c["alpha"]), n_neurons=int(c["n_neurons"]), rate_fn=f, jump_law=law,
            init_law=init, epsilon=float(c["epsilon"]), horizon=float(c["horizon"]),
            delta=None if delta is None else float(delta),
            substeps_per_delta=int(c["substeps_per_delta"]), base_seed=int(c["seed"]),
            coupler=c["coupler"], aux_freeze=c["aux_freeze"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
