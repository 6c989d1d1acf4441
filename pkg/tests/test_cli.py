import csv
import json
from pathlib import Path

import pytest

from mfnc import cli, config

SMALL = ["--set", "n_neurons=16", "--set", "replicates=2", "--set", "dump_replicates=1"]


def outdir(root, command):
    (d,) = Path(root).glob(f"{command}-*")
    return d


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_validate_default(tmp_path, capsys):
    assert cli.run(["validate", "--out", str(tmp_path)]) == 0
    d = outdir(tmp_path, "validate")
    rep = json.loads((d / "validation.json").read_text())
    assert rep["ok"] and all(c["passed"] for c in rep["checks"])
    man = json.loads((d / "manifest.json").read_text())
    assert man["config_digest"] in d.name and man["seed"] == 20240601
    assert {"mfnc", "python", "numpy", "scipy", "kernels"} <= set(man["versions"])
    assert "wall_time_s" in man


def test_zero_rate_floor_exits_2(tmp_path):
    assert cli.run(["validate", "--out", str(tmp_path), "--set", "f.min=0"]) == 2
    assert cli.run(["rate-study", "--out", str(tmp_path), "--set", "f.min=0"]) == 2


@pytest.mark.parametrize("argv", [["bogus"], ["validate", "--set", "gamma=1"], ["validate", "--jobs", "0"],
                                  ["validate", "--set", "noequals"], ["validate", "--config", "/no/such/file"],
                                  ["validate", "--set", "f.colour=1"], []])
def test_usage_errors_exit_1(tmp_path, argv):
    assert cli.run(argv + ["--out", str(tmp_path)] if argv else argv) == 1


def test_malformed_value_exits_1(tmp_path):
    assert cli.run(["validate", "--out", str(tmp_path), "--set", "coupler='kmt'"]) == 1


def test_minimal_rate_study(tmp_path):
    argv = ["rate-study", "--out", str(tmp_path), "--set", "n_values=[16]", "--set", "replicates=2"]
    assert cli.run(argv) == 0
    d = outdir(tmp_path, "rate-study")
    res = json.loads((d / "result.json").read_text())
    assert res["fit"]["degenerate"] and res["fit"]["slope"] is None
    assert [r["N"] for r in res["records"]] == [16]
    assert set(res["records"][0]) == {"N", "delta", "R", "mean", "std", "ci_low", "ci_high"}
    assert read_csv(d / "records.csv")[0] == ["N", "delta", "R", "mean", "std", "ci_low", "ci_high"]
    assert not (d / "partial.json").exists()
    assert (d / "error_vs_n.svg").read_text().startswith("<svg")


def test_simulate_commands(tmp_path):
    assert cli.run(["simulate-finite", "--out", str(tmp_path)] + SMALL) == 0
    d = outdir(tmp_path, "simulate-finite")
    assert read_csv(d / "events.csv")[0] == ["replicate", "neuron", "time", "z", "u", "accepted_live", "accepted_frozen"]
    assert read_csv(d / "path.csv")[0] == ["replicate", "system", "neuron", "grid_time", "value"]
    assert cli.run(["simulate-coupled", "--out", str(tmp_path)] + SMALL) == 0
    d = outdir(tmp_path, "simulate-coupled")
    rows = read_csv(d / "intervals.csv")
    assert rows[0] == ["replicate", "k", "n_frozen", "w_increment", "k_stat", "e_stat"]
    systems = {r[1] for r in read_csv(d / "path.csv")[1:]}
    assert systems == {"finite", "aux"}
    summ = json.loads((d / "summary.json").read_text())
    assert summ["replicates"][0]["sup_distance"] >= 0


def test_coupler_bench(tmp_path):
    argv = ["coupler-bench", "--out", str(tmp_path), "--set", "bench_n=[64, 256]", "--set", "replicates=3"]
    assert cli.run(argv) == 0
    d = outdir(tmp_path, "coupler-bench")
    rows = read_csv(d / "sup_stat.csv")
    assert rows[0] == ["method", "n", "replicate", "sup_stat"] and len(rows) == 1 + 3 * 2 * 3
    summ = json.loads((d / "summary.json").read_text())
    assert "p99_ratio" in summ["methods"]["dyadic"]
    assert (d / "sup_stat_hist.svg").exists()


def test_remainder_and_appendix(tmp_path):
    argv = ["remainder-probe", "--out", str(tmp_path), "--set", "remainder_n=[16, 32]", "--set", "replicates=2"]
    assert cli.run(argv) == 0
    d = outdir(tmp_path, "remainder-probe")
    assert read_csv(d / "remainder.csv")[0] == ["N", "replicate", "remainder"]
    argv = ["appendix-checks", "--out", str(tmp_path), "--no-plot", "--set", "replicates=20",
            "--set", "increment_n=16", "--set", "poisson_samples=200", "--set", "poisson_cases=[[100, 0.2]]"]
    assert cli.run(argv) == 0
    res = json.loads((outdir(tmp_path, "appendix-checks") / "result.json").read_text())
    assert res["poisson"][0]["below_bound"] and len(res["increment"]["means"]) == 4


def test_numerical_failure_exits_3(tmp_path, monkeypatch):
    def boom(*a):
        raise FloatingPointError("overflow")
    monkeypatch.setitem(cli.HANDLERS, "simulate-finite", boom)
    assert cli.run(["simulate-finite", "--out", str(tmp_path)]) == 3


def test_main_exits(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["validate", "--out", str(tmp_path)])
    assert exc.value.code == 0


# ---------------------------------------------------------------- config

def test_config_file_and_overrides(tmp_path):
    f = tmp_path / "c.toml"
    f.write_text('n_neurons = 64\n[nu]\nkind = "lattice"\nsupport = [-1.0, 1.0]\nprobs = [0.5, 0.5]\n')
    cfg = config.load(str(f), ["alpha=0.5", "f.max=3.0"], env={})
    p = config.to_params(cfg)
    assert p.n_neurons == 64 and p.alpha == 0.5 and p.rate_fn.f_max == 3.0
    assert p.jump_law.kind == "lattice"


def test_kind_change_replaces_table():
    cfg = config.load(None, ["nu0.kind='point'", "nu0.value=0.25"], env={})
    assert config.to_params(cfg).init_law.value == 0.25
    cfg = config.load(None, ["nu.kind='lattice'"], env={})
    assert "support" not in cfg["nu"]
    with pytest.raises(config.ConfigError):
        config.to_params(cfg)


def test_seed_env_override():
    assert config.load(None, env={"MFNC_SEED": "7"})["seed"] == 7
    with pytest.raises(config.ConfigError):
        config.load(None, env={"MFNC_SEED": "x"})


def test_unknown_keys_rejected(tmp_path):
    f = tmp_path / "c.toml"
    f.write_text("[f]\nkind = 'constant'\nslope = 2\n")
    with pytest.raises(config.ConfigError):
        config.load(str(f), env={})
    f.write_text("nonsense = [\n")
    with pytest.raises(config.ConfigError):
        config.load(str(f), env={})


def test_digest_stable():
    a = config.load(None, env={})
    b = config.load(None, env={})
    assert config.digest(a) == config.digest(b) and len(config.digest(a)) == 12
    assert config.digest(config.load(None, ["alpha=2.0"], env={})) != config.digest(a)
