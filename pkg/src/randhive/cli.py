"""Command line harness: ``randhive <command> [--config FILE] [flags]``.

Config files are plain text, one ``key = value`` per line, ``#`` starts a
comment.  Lists are comma separated; lists of pairs use ``;`` between
pairs.  Every run writes its outputs plus ``manifest.json`` (config echo,
version, output hashes, summary) into the output directory, and the wall
time into ``run_info.json``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, RandHiveError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


# ---------------------------------------------------------------------------
# config


def _floats(text):
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def _ints(text):
    return tuple(int(x) for x in str(text).split(",") if x.strip())


def _pairs(text):
    return tuple(_floats(p) for p in str(text).split(";") if p.strip())


SAMPLE_FUNCTIONS = ("cones", "waves", "distance", "tent")

COMMON = {"seed": (int, 0), "trials": (int, None), "threads": (int, None), "out": (str, None)}

SCHEMAS = {
    "sample-hive": {
        "n": (int, 50), "trials": (int, 50), "sigma_lambda": (float, 1.0), "sigma_mu": (float, 1.0),
    },
    "tension": {
        "position": (_floats, (0.35, 0.7)), "tilts": (_pairs, None), "m_schedule": (_ints, (8, 16, 32)),
        "trials": (int, 200), "side": (str, "lo"), "eps_ratios": (_floats, (0.5, 1.0)), "variance_param": (float, 1.0),
    },
    "solve": {
        "v": (_floats, (0.5, 0.5)), "n": (int, 200), "trials": (int, 100), "mesh": (int, 16), "m": (int, 8),
        "table_trials": (int, 20), "spacing": (float, 0.1), "position": (_floats, (0.35, 0.7)),
    },
    "czd": {
        "eps": (float, 0.9), "eta": (float, 0.25), "k": (int, 7), "c_sharp": (float, 1.0),
        "function": (str, "cones"), "function_seed": (int, 0),
    },
    "check": {"trials": (int, 5)},
}


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def resolve_config(command: str, raw: dict, overrides: dict) -> dict:
    """Validate keys, convert values and fill in every default explicitly."""
    schema = {**COMMON, **SCHEMAS[command]}
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {', '.join(unknown)}")
    cfg = {}
    for key, (conv, default) in schema.items():
        if key in overrides and overrides[key] is not None:
            value = overrides[key]
        elif key in raw:
            value = raw[key]
        else:
            cfg[key] = default
            continue
        try:
            cfg[key] = conv(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {value!r} ({exc})") from None
    if cfg["out"] is None:
        cfg["out"] = f"runs/{command}"
    if cfg["threads"] is None:
        from .pipeline import default_threads

        cfg["threads"] = default_threads()
    if cfg["threads"] < 1:
        raise ConfigError("threads must be at least 1")
    if cfg.get("trials") is not None and cfg["trials"] < 1:
        raise ConfigError("trials must be positive")
    return cfg


# ---------------------------------------------------------------------------
# output helpers


class Run:
    def __init__(self, command: str, cfg: dict):
        self.command = command
        self.cfg = cfg
        self.out = Path(cfg["out"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = {}
        self.start = time.perf_counter()

    def write(self, name: str, text: str):
        data = text.encode()
        (self.out / name).write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()

    def finish(self, summary: dict):
        # threads and the output location do not affect results, so they stay out of the manifest
        echo = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.cfg.items() if k not in ("threads", "out")}
        manifest = {
            "command": self.command,
            "version": __version__,
            "config": _jsonable(echo),
            "outputs": dict(sorted(self.files.items())),
            "summary": _jsonable(summary),
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        info = {"wall_time_s": time.perf_counter() - self.start, "threads": self.cfg["threads"]}
        (self.out / "run_info.json").write_text(json.dumps(info, indent=2) + "\n")
        return manifest


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _grid_csv(arr) -> str:
    rows = ["i,j,value"]
    for i in range(arr.shape[0]):
        for j in range(arr.shape[1]):
            if math.isfinite(arr[i, j]):
                rows.append(f"{i},{j},{float(arr[i, j])!r}")
    return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_sample_hive(cfg):
    from .pipeline import hive_samples
    from .svg import heatmap

    run = Run("sample-hive", cfg)
    n = cfg["n"]
    if n < 2:
        raise ConfigError("n must be at least 2")
    samples = hive_samples(n, cfg["trials"], cfg["seed"], cfg["sigma_lambda"], cfg["sigma_mu"], cfg["threads"])
    stack = np.array([s.normalized for s in samples])
    mean = stack.mean(axis=0)
    var = stack.var(axis=0, ddof=1) if len(samples) > 1 else np.zeros_like(mean)
    run.write("hive_mean.csv", _grid_csv(mean))
    run.write("hive_variance.csv", _grid_csv(var))
    run.write("hive_mean.svg", heatmap(mean, f"mean n^-2 h, n={n}"))
    run.write("hive_variance.svg", heatmap(var, f"variance n^-2 h, n={n}"))
    c = (n // 2, n // 2)
    return run, {"n": n, "trials": cfg["trials"], "center": list(c), "center_mean": mean[c], "center_variance": var[c]}


def cmd_tension(cfg):
    from .pipeline import tension_grid, tension_line, tension_properties

    run = Run("tension", cfg)
    tilts = list(cfg["tilts"]) if cfg["tilts"] else tension_line()
    grids = {}
    for m in cfg["m_schedule"]:
        grids[m] = tension_grid(tilts, m, cfg["trials"], cfg["eps_ratios"], cfg["position"], cfg["side"],
                                cfg["seed"], cfg["variance_param"], cfg["threads"])
    rows = ["position_entry,position_row,side,tilt_a,tilt_b,m,eps_ratio,mean,std_error"]
    for m, g in grids.items():
        for a, t in enumerate(tilts):
            for b, r in enumerate(cfg["eps_ratios"]):
                x = g[:, a, b]
                se = float(x.std(ddof=1) / math.sqrt(x.size))
                px, py = cfg["position"]
                rows.append(f"{px!r},{py!r},{cfg['side']},{t[0]!r},{t[1]!r},{m},{r!r},{float(x.mean())!r},{se!r}")
    run.write("tension.csv", "\n".join(rows) + "\n")
    props = tension_properties(grids, tilts)
    run.write("diagnostics.json", json.dumps(_jsonable(props), indent=2, sort_keys=True) + "\n")
    return run, {"properties_ok": props["ok"], "tilts": [list(t) for t in tilts]}


def cmd_solve(cfg):
    from .pipeline import consistency_experiment, hive_samples
    from .svg import heatmap

    run = Run("solve", cfg)
    samples = hive_samples(cfg["n"], cfg["trials"], cfg["seed"], threads=cfg["threads"])
    report, f, tables = consistency_experiment(samples, cfg["v"], cfg["mesh"], cfg["m"], cfg["table_trials"],
                                               cfg["spacing"], cfg["position"], cfg["seed"], cfg["threads"])
    for side, tab in tables.items():
        run.write(f"sigma_{side}.csv", tab.to_csv())
    run.write("optimum.csv", f.to_csv())
    n = f.hexagon.n
    grid = np.full((n + 1, n + 1), np.nan)
    for side in ("up", "lo"):
        for p, val in f.field(side).items():
            grid[p] = val
    run.write("optimum.svg", heatmap(grid, "maximizing height pair", cell=12))
    run.write("solve.json", json.dumps(_jsonable(report.summary()), indent=2, sort_keys=True) + "\n")
    return run, {k: report.summary()[k] for k in ("empirical", "predicted", "relative_gap", "s_hex", "s_diamond", "s_delta")}


def cmd_czd(cfg):
    from .qdiff import cz_decompose, random_lipschitz, verify_cz
    from .randmat import rng_for
    from .svg import cz_svg

    run = Run("czd", cfg)
    if cfg["function"] not in SAMPLE_FUNCTIONS:
        raise ConfigError(f"unknown sample function {cfg['function']!r}; choose from {', '.join(SAMPLE_FUNCTIONS)}")
    fn = random_lipschitz(rng_for(cfg["function_seed"], 17), cfg["function"])
    result = cz_decompose(fn, cfg["eps"], cfg["eta"], cfg["k"], cfg["c_sharp"])
    report = verify_cz(fn, result)
    run.write("decomposition.json", result.to_json() + "\n")
    run.write("overlay.svg", cz_svg(result))
    run.write("verification.json", json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    summary = {"good": len(result.good), "bad": len(result.bad), "bad_volume": result.bad_volume, "ok": report["ok"]}
    return run, summary


def cmd_check(cfg):
    from .pipeline import run_checks

    run = Run("check", cfg)
    results = run_checks(cfg["seed"], cfg["trials"])
    rows = [{"name": n, "ok": ok, "detail": d} for n, ok, d in results]
    run.write("check.json", json.dumps(rows, indent=2) + "\n")
    for r in rows:
        print(f"{'PASS' if r['ok'] else 'FAIL'}  {r['name']}: {r['detail']}")
    return run, {"passed": sum(r["ok"] for r in rows), "total": len(rows), "ok": all(r["ok"] for r in rows)}


COMMANDS = {"sample-hive": cmd_sample_hive, "tension": cmd_tension, "solve": cmd_solve, "czd": cmd_czd, "check": cmd_check}


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="randhive", description="Random hive experiments.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="plain-text key = value file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, help="worker processes (default: all cores)")
    p.add_argument("--trials", type=int)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        raw = parse_config_text(Path(args.config).read_text()) if args.config else {}
        overrides = {"seed": args.seed, "out": args.out, "threads": args.threads, "trials": args.trials}
        cfg = resolve_config(args.command, raw, overrides)
        run, summary = COMMANDS[args.command](cfg)
        manifest = run.finish(summary)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RandHiveError as exc:
        print(f"{args.command}: {type(exc).__module__}.{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(json.dumps(manifest["summary"], sort_keys=True))
    failed = summary.get("ok") is False
    return EXIT_NUMERICAL if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
