"""Command-line experiment runner.

    maxreg-lab run --config <path> [--out <dir>] [--seed <u64>] [--experiment <name>]

The config file holds ``key = value`` lines; ``#`` starts a comment.  Each
run writes ``<experiment>.csv`` (one row per check) and ``<experiment>.meta``
(seed, grid, versions, timestamp, runtimes) into the output directory.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import platform
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from .errors import NumericalError
from .experiments import EXPERIMENTS, Settings, run_suite

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHECK = 3
EXIT_NUMERICAL = 4
EXIT_UNKNOWN_EXPERIMENT = 5
EXIT_OUTPUT = 6

U64_MAX = 2**64 - 1
CSV_COLUMNS = ("criterion", "check", "measured", "threshold", "status")


class ConfigError(ValueError):
    pass


class UnknownExperimentError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str = "all"
    n: int = 128
    m: int = 256
    T: float = 1.0
    p: float = 2.0
    seed: int = 42
    grids: tuple = (32, 64, 128)
    trials: int = 100
    k: int = 8
    kappa_n: int = 16384
    alpha: float = 1.0
    mu0: float = 1.0
    out: str = "results"
    tolerances: dict = field(default_factory=dict)

    def settings(self) -> Settings:
        return Settings(self.n, self.m, self.T, self.p, self.seed, tuple(self.grids), self.trials,
                        self.k, self.kappa_n, self.alpha, self.mu0, dict(self.tolerances))


def _int(text: str) -> int:
    val = float(text)
    if not val.is_integer():
        raise ValueError(f"expected an integer, got {text!r}")
    return int(val)


def _positive(conv, minimum=None):
    def parse(text: str):
        val = conv(text)
        if not val > 0:
            raise ValueError(f"must be positive, got {text!r}")
        if minimum is not None and val < minimum:
            raise ValueError(f"must be at least {minimum}, got {text!r}")
        return val
    return parse


def _p(text: str) -> float:
    val = float(text)
    if not val > 1:
        raise ValueError(f"p must exceed 1, got {text!r}")
    return val


def _seed(text: str) -> int:
    val = int(text, 0)
    if not 0 <= val <= U64_MAX:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {text!r}")
    return val


def _grids(text: str) -> tuple:
    vals = tuple(_positive(_int, 8)(t) for t in text.replace(",", " ").split())
    if not vals or list(vals) != sorted(set(vals)):
        raise ValueError(f"grids must be a strictly increasing list, got {text!r}")
    return vals


def _experiment(text: str) -> str:
    if text not in EXPERIMENTS:
        raise UnknownExperimentError(f"unknown experiment {text!r}; choose from {', '.join(EXPERIMENTS)}")
    return text


def _tolerance(text: str):
    parts = [float(t) for t in text.replace(",", " ").split()]
    if len(parts) not in (1, 2):
        raise ValueError("tolerance takes one bound or a pair")
    return parts[0] if len(parts) == 1 else tuple(parts)


PARSERS = {
    "experiment": _experiment,
    "n": _positive(_int, 8),
    "m": _positive(_int, 8),
    "T": _positive(float),
    "p": _p,
    "seed": _seed,
    "grids": _grids,
    "trials": _positive(_int, 100),
    "k": _positive(_int),
    "kappa_n": _positive(_int, 16),
    "alpha": _positive(float),
    "mu0": _positive(float),
    "out": str,
}


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    cfg = ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        # check names may contain '=', so tolerance keys split at the last one
        split = line.rsplit if line.startswith("tol.") else line.split
        key, value = (part.strip() for part in split("=", 1))
        if not value:
            raise ConfigError(f"{source}:{lineno}: missing value for {key!r}")
        try:
            if key.startswith("tol."):
                cfg.tolerances[key[4:].strip()] = _tolerance(value)
                continue
            if key not in PARSERS:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
            setattr(cfg, key, PARSERS[key](value))
        except UnknownExperimentError as exc:
            raise UnknownExperimentError(f"{source}:{lineno}: {exc}") from None
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    if cfg.kappa_n % 2:
        raise ConfigError(f"{source}: kappa_n must be even")
    return cfg


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, str(path))


def render_csv(checks) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for c in checks:
        w.writerow((c.criterion, c.name, f"{c.measured:.17g}", c.threshold, c.status))
    return buf.getvalue()


def _metadata(cfg: ExperimentConfig, rec, seconds: float) -> dict:
    return {
        "experiment": cfg.experiment,
        "seed": cfg.seed,
        "grid": {"n": cfg.n, "m": cfg.m, "T": cfg.T, "grids": list(cfg.grids), "kappa_n": cfg.kappa_n},
        "p": cfg.p,
        "trials": cfg.trials,
        "tolerance_overrides": {k: v for k, v in cfg.tolerances.items()},
        "versions": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "runtime_seconds": seconds,
        "runtime_checks": [
            {"criterion": c.criterion, "check": c.name, "measured": c.measured, "threshold": c.threshold,
             "status": c.status} for c in rec.timings
        ],
    }


def run_experiment(cfg: ExperimentConfig, stream=None) -> int:
    """Run one suite, write its CSV and sidecar, print one line per check."""
    stream = sys.stdout if stream is None else stream
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / f".{cfg.experiment}.probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        print(f"error: output directory {out} is not writable: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    t0 = time.perf_counter()
    try:
        rec = run_suite(cfg.experiment, cfg.settings())
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure in {cfg.experiment}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    seconds = time.perf_counter() - t0
    known = {c.name for c in rec.checks}
    for name in sorted(set(cfg.tolerances) - known):
        print(f"warning: tolerance override {name!r} matches no check in {cfg.experiment}", file=sys.stderr)
    try:
        (out / f"{cfg.experiment}.csv").write_text(render_csv(rec.checks))
        (out / f"{cfg.experiment}.meta").write_text(json.dumps(_metadata(cfg, rec, seconds), indent=2) + "\n")
    except OSError as exc:
        print(f"error: cannot write results to {out}: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    for c in rec.checks + rec.timings:
        print(f"[{c.criterion}] {c.status} {c.name}: measured={c.measured:.6g} threshold {c.threshold}", file=stream)
    graded = [c for c in rec.checks + rec.timings if c.kind != "info"]
    failed = [c for c in graded if not c.passed]
    print(f"{cfg.experiment}: {len(graded) - len(failed)} passed, {len(failed)} failed, "
          f"{len(rec.checks) + len(rec.timings) - len(graded)} reported", file=stream)
    return EXIT_CHECK if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maxreg-lab", description="Run maximal-regularity experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment suite")
    run.add_argument("--config", required=True, help="key = value config file")
    run.add_argument("--out", help="output directory (overrides config)")
    run.add_argument("--seed", help="unsigned 64-bit seed (overrides config)")
    run.add_argument("--experiment", help=f"one of: {', '.join(EXPERIMENTS)}")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = parse_config(args.config)
        if args.experiment is not None:
            cfg.experiment = _experiment(args.experiment)
        if args.seed is not None:
            cfg.seed = _seed(args.seed)
        if args.out is not None:
            cfg.out = args.out
    except UnknownExperimentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_UNKNOWN_EXPERIMENT
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_experiment(cfg)


if __name__ == "__main__":
    sys.exit(main())
