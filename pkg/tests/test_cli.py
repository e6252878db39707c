import json

import pytest
from hypothesis import given, settings, strategies as st

from maxreg_lab import cli
from maxreg_lab.cli import (
    EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_OUTPUT, EXIT_UNKNOWN_EXPERIMENT, ConfigError,
    ExperimentConfig, UnknownExperimentError, main, parse_config, parse_config_text, render_csv,
)
from maxreg_lab.errors import NumericalError
from maxreg_lab.experiments import Check


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_empty_config_gives_defaults():
    cfg = parse_config_text("")
    assert (cfg.n, cfg.m, cfg.T, cfg.p, cfg.seed) == (128, 256, 1.0, 2.0, 42)
    assert cfg.experiment == "all"


def test_values_and_comments():
    cfg = parse_config_text("p = 2.5\n# comment\n\nn = 64   # trailing\ngrids = 16, 32 64\nseed = 0xff\n")
    assert cfg.p == 2.5 and cfg.n == 64 and cfg.grids == (16, 32, 64) and cfg.seed == 255


@pytest.mark.parametrize("text,line", [
    ("n = -4", 1),
    ("p = 2\n\nn = -4", 3),
    ("m = 4", 1),
    ("p = 1", 1),
    ("seed = -1", 1),
    (f"seed = {2**64}", 1),
    ("grids = 64 32", 1),
    ("n = 12.5", 1),
    ("T = abc", 1),
    ("trials = 10", 1),
    ("bogus = 3", 1),
    ("n 64", 1),
    ("n =", 1),
    ("tol.x = 1 2 3", 1),
])
def test_config_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError, match=rf"<config>:{line}:"):
        parse_config_text(text)


def test_unknown_experiment_is_distinct():
    with pytest.raises(UnknownExperimentError, match="<config>:2:"):
        parse_config_text("n = 64\nexperiment = nope")


def test_odd_kappa_grid_rejected():
    with pytest.raises(ConfigError):
        parse_config_text("kappa_n = 1001")


def test_tolerance_keys_may_contain_equals():
    cfg = parse_config_text("tol.Greiner relation lambda=2.0 mu=1.0 = 1e-12\ntol.K D_1 at n=128 = 0.46 0.47")
    assert cfg.tolerances == {"Greiner relation lambda=2.0 mu=1.0": 1e-12, "K D_1 at n=128": (0.46, 0.47)}


def test_parse_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "absent.cfg")


@settings(max_examples=40, deadline=None)
@given(st.integers(8, 4096), st.floats(1.01, 10.0), st.integers(0, 2**64 - 1), st.floats(0.01, 100.0))
def test_roundtrip(n, p, seed, T):
    cfg = parse_config_text(f"n = {n}\np = {p!r}\nseed = {seed}\nT = {T!r}\n")
    assert (cfg.n, cfg.p, cfg.seed, cfg.T) == (n, p, seed, T)


def test_render_csv_fixed_columns():
    checks = [Check("C1", "a, b", 1 / 3, "le", (1e-10,)), Check("C2", "c", 4.0, "in", (3.0, 5.0))]
    lines = render_csv(checks).splitlines()
    assert lines[0] == "criterion,check,measured,threshold,status"
    assert lines[1] == 'C1,"a, b",0.33333333333333331,<= 1e-10,FAIL'
    assert lines[2] == "C2,c,4,\"[3, 5]\",PASS"


def test_identities_run(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = _write(tmp_path, "experiment = identities\nn = 64\n")
    assert main(["run", "--config", cfg, "--out", str(out), "--seed", "7"]) == EXIT_OK
    body = (out / "identities.csv").read_text().splitlines()
    assert body[0] == "criterion,check,measured,threshold,status"
    assert len(body) == 16 and all(row.startswith("C1,") for row in body[1:])
    assert sum(row.endswith(",PASS") for row in body) == 10
    assert sum(row.endswith(",report only,INFO") for row in body) == 5
    meta = json.loads((out / "identities.meta").read_text())
    assert meta["seed"] == 7 and meta["grid"]["n"] == 64
    assert {"python", "numpy", "scipy"} <= set(meta["versions"])
    assert meta["runtime_checks"][0]["status"] == "PASS"
    text = capsys.readouterr().out
    assert "[C1] PASS" in text and "identities: 11 passed, 0 failed, 5 reported" in text


def test_csv_bodies_are_deterministic(tmp_path):
    cfg = _write(tmp_path, "experiment = dirichlet\n")
    bodies = []
    for k in range(2):
        out = tmp_path / f"r{k}"
        assert main(["run", "--config", cfg, "--out", str(out)]) == EXIT_OK
        bodies.append((out / "dirichlet.csv").read_bytes())
    assert bodies[0] == bodies[1]


def test_check_failure_exit(tmp_path, capsys):
    cfg = _write(tmp_path, "experiment = dirichlet\ntol.K D_1 at n=128 = 0.0 0.1\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_CHECK
    assert "FAIL" in capsys.readouterr().out


def test_unmatched_override_warns(tmp_path, capsys):
    cfg = _write(tmp_path, "experiment = dirichlet\ntol.no such check = 1\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    assert "matches no check" in capsys.readouterr().err


def test_exit_codes_for_bad_input(tmp_path, capsys):
    good = _write(tmp_path, "experiment = identities\n")
    assert main(["run", "--config", _write(tmp_path, "n = -4\n", "bad.cfg")]) == EXIT_CONFIG
    assert "bad.cfg:1:" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG
    assert main(["run", "--config", good, "--seed", "-3"]) == EXIT_CONFIG
    assert main(["run", "--config", good, "--experiment", "nope"]) == EXIT_UNKNOWN_EXPERIMENT
    assert "usage" in capsys.readouterr().err
    assert main(["run", "--config", _write(tmp_path, "experiment = nope\n", "x.cfg")]) == EXIT_UNKNOWN_EXPERIMENT
    assert main([]) == EXIT_CONFIG
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", "--config", good, "--out", str(blocker / "sub")]) == EXIT_OUTPUT


def test_numerical_failure_exit(tmp_path, monkeypatch):
    def boom(name, settings):
        raise NumericalError("eigensolver did not converge")
    monkeypatch.setattr(cli, "run_suite", boom)
    cfg = _write(tmp_path, "experiment = identities\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_NUMERICAL


def test_exit_codes_distinct():
    codes = {EXIT_OK, EXIT_CONFIG, EXIT_CHECK, EXIT_NUMERICAL, EXIT_UNKNOWN_EXPERIMENT, EXIT_OUTPUT}
    assert len(codes) == 6


def test_settings_carry_config():
    cfg = ExperimentConfig(n=64, grids=(16, 32), tolerances={"x": 1.0})
    st_ = cfg.settings()
    assert st_.n == 64 and st_.grids == (16, 32) and st_.tolerances == {"x": 1.0}
