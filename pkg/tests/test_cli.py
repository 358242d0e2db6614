"""Command-line harness: configs, manifests, exit codes and determinism."""

import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from randhive.cli import ConfigError, main, parse_config_text, resolve_config


def run(tmp_path, name, *args, config=None):
    out = tmp_path / name
    argv = list(args) + ["--out", str(out)]
    if config is not None:
        cfg = tmp_path / f"{name}.cfg"
        cfg.write_text(config)
        argv += ["--config", str(cfg)]
    return main(argv), out


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_parse_config_text():
    text = "# comment\nn = 12\nv = 0.5, 0.25  # trailing\n\ntilts = 0,0; 0.3,0.1\n"
    raw = parse_config_text(text)
    assert raw == {"n": "12", "v": "0.5, 0.25", "tilts": "0,0; 0.3,0.1"}
    with pytest.raises(ConfigError):
        parse_config_text("n 12")
    with pytest.raises(ConfigError):
        parse_config_text("n = 1\nn = 2")


def test_resolve_config_fills_defaults():
    cfg = resolve_config("czd", {"eps": "0.8"}, {"seed": 3, "out": None, "threads": 1, "trials": None})
    assert cfg["eps"] == 0.8 and cfg["eta"] == 0.25 and cfg["k"] == 7 and cfg["seed"] == 3
    assert cfg["out"] == "runs/czd"
    with pytest.raises(ConfigError):
        resolve_config("czd", {"colour": "red"}, {})
    with pytest.raises(ConfigError):
        resolve_config("czd", {"k": "seven"}, {})
    with pytest.raises(ConfigError):
        resolve_config("czd", {}, {"threads": 0})


def test_sample_hive_outputs_and_hashes(tmp_path):
    code, out = run(tmp_path, "hive", "sample-hive", "--seed", "1", "--threads", "1", config="n = 10\ntrials = 6\n")
    assert code == 0
    m = manifest(out)
    assert m["config"]["n"] == 10 and m["config"]["sigma_mu"] == 1.0
    assert set(m["outputs"]) == {"hive_mean.csv", "hive_variance.csv", "hive_mean.svg", "hive_variance.svg"}
    for name, digest in m["outputs"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    info = json.loads((out / "run_info.json").read_text())
    assert info["wall_time_s"] >= 0
    assert "threads" not in m["config"]


def test_sample_hive_variance_shrinks_with_n(tmp_path):
    var = {}
    for n in (12, 24):
        code, out = run(tmp_path, f"v{n}", "sample-hive", "--seed", "2", "--threads", "1", config=f"n = {n}\ntrials = 40\n")
        assert code == 0
        rows = (out / "hive_variance.csv").read_text().splitlines()[1:]
        table = {tuple(map(int, r.split(",")[:2])): float(r.split(",")[2]) for r in rows}
        var[n] = table[(n // 2, n // 2)]
    assert var[24] < var[12]


def test_same_seed_same_bytes_any_thread_count(tmp_path):
    cfg = "n = 10\ntrials = 8\n"
    _, a = run(tmp_path, "a", "sample-hive", "--seed", "4", "--threads", "1", config=cfg)
    _, b = run(tmp_path, "b", "sample-hive", "--seed", "4", "--threads", "1", config=cfg)
    _, c = run(tmp_path, "c", "sample-hive", "--seed", "4", "--threads", "3", config=cfg)
    assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes() == (c / "manifest.json").read_bytes()
    _, d = run(tmp_path, "d", "sample-hive", "--seed", "5", "--threads", "1", config=cfg)
    assert manifest(d)["outputs"] != manifest(a)["outputs"]


def test_czd_outputs(tmp_path):
    code, out = run(tmp_path, "czd", "czd", "--threads", "1", config="function = distance\n")
    assert code == 0
    assert (out / "overlay.svg").read_text().startswith("<svg")
    assert json.loads((out / "verification.json").read_text())["ok"]
    code, out = run(tmp_path, "czd2", "czd", "--threads", "1", config="eps = 0.3\neta = 0.05\nk = 6\nc_sharp = 0.001\n")
    assert code in (0, 3)
    assert "#e06666" in (out / "overlay.svg").read_text()


def test_exit_codes(tmp_path):
    assert run(tmp_path, "x", "czd", config="eps = 0.2\n")[0] == 3  # precondition fails
    assert run(tmp_path, "y", "czd", config="unknown = 1\n")[0] == 2
    assert run(tmp_path, "z", "czd", config="function = spiral\n")[0] == 2
    assert main(["no-such-command"]) == 2
    assert main(["czd", "--config", str(tmp_path / "missing.cfg")]) == 2


def test_tension_command(tmp_path):
    cfg = "m_schedule = 4, 6\ntrials = 6\ntilts = 0,0; 0.2,0.1; 0.4,0.2\n"
    code, out = run(tmp_path, "t", "tension", "--threads", "1", config=cfg)
    assert code in (0, 3)
    lines = (out / "tension.csv").read_text().splitlines()
    assert len(lines) > 1 and "m" in lines[0]
    diag = json.loads((out / "diagnostics.json").read_text())
    assert {"nonnegative", "eps_monotone"} <= set(diag["ok"])
    assert diag["ok"]["eps_monotone"]


def test_solve_command(tmp_path):
    cfg = "n = 24\ntrials = 30\nmesh = 6\nm = 3\ntable_trials = 4\nspacing = 0.25\n"
    code, out = run(tmp_path, "s", "solve", "--threads", "1", config=cfg)
    assert code in (0, 3)
    m = manifest(out)
    assert {"optimum.csv", "optimum.svg", "solve.json", "sigma_up.csv", "sigma_lo.csv"} <= set(m["outputs"])
    report = json.loads((out / "solve.json").read_text())
    assert np.isfinite(report["predicted"]) and np.isfinite(report["empirical"])


def test_check_command_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "randhive", "check", "--out", str(tmp_path / "chk"), "--threads", "1"],
                         capture_output=True, text=True, timeout=600)
    assert res.returncode == 0, res.stderr
    assert res.stdout.count("PASS") == 8
