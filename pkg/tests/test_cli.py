import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from hermitian_energy import cli


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


# --- config ----------------------------------------------------------------------


def test_empty_config_gives_defaults():
    cfg = cli.parse_config("")
    assert cfg["grid"]["n"] == 16 and cfg["path"]["Q"] == 24 and cfg.checks == list(cli.CHECK_NAMES)
    assert cfg == cli.default_config()


def test_odd_n_names_the_field():
    with pytest.raises(cli.ConfigError, match=r"grid\.n"):
        cli.parse_config("grid:\n  n: 7\n")


def test_unknown_keys_rejected():
    with pytest.raises(cli.ConfigError, match="unknown key 'm'"):
        cli.parse_config("grid: {m: 8}")
    with pytest.raises(cli.ConfigError, match="unknown section"):
        cli.parse_config("solver: {}")
    with pytest.raises(cli.ConfigError, match="unknown check"):
        cli.parse_config("checks: [nope]")


def test_type_errors():
    with pytest.raises(cli.ConfigError, match="integer"):
        cli.parse_config("grid: {n: 16.5}")
    with pytest.raises(cli.ConfigError, match="true/false"):
        cli.parse_config("phi: {normalize_sup: 3}")
    with pytest.raises(cli.ConfigError, match="metric.family"):
        cli.parse_config("metric: {family: hopf}")
    with pytest.raises(cli.ConfigError, match="top level"):
        cli.parse_config("- 1\n- 2\n")


def test_parse_error_is_positional():
    with pytest.raises(cli.ConfigError, match="line 2, column 1"):
        cli.parse_config("grid:\n\tn: 16\n")


def test_full_config_round_trips():
    text = """
grid: {n: 8}
metric: {family: generic, amplitude: 0.05, seed: 3, profile: exp}
phi: {family: cosine, band: 2, amplitude: 0.02, seed: 5, normalize_sup: false, samples: 4}
path: {kind: poly, detour_seed: 9, Q: 12}
tolerances: {identity_rel: 1.0e-8, positivity_margin: 1.0e-5}
checks: [translation, stokes_parity]
output: {format: csv, path: out.csv}
"""
    cfg = cli.parse_config(text)
    assert cli.parse_config(cfg.to_text()) == cfg
    assert cfg["phi"]["family"] == "cosine" and cfg.checks == ["translation", "stokes_parity"]
    s = cfg.scenario()
    assert s.n == 8 and s.metric_profile == "exp" and s.nodes == 12


def test_exponent_without_decimal_point_is_a_number():
    assert cli.parse_config("tolerances: {identity_rel: 1e-8}")["tolerances"]["identity_rel"] == 1e-8


def test_overrides():
    cfg = cli.apply_override(cli.default_config(), "grid.n=8")
    assert cfg["grid"]["n"] == 8
    cfg = cli.apply_override(cfg, "checks=[translation]")
    assert cfg.checks == ["translation"]
    cfg = cli.apply_override(cfg, "output.path=")
    assert cfg["output"]["path"] is None
    for bad in ("grid.n", "nosuch.key=1", "a.b.c=1", "grid.n=abc"):
        with pytest.raises(cli.ConfigError):
            cli.apply_override(cli.default_config(), bad)


# --- exit codes --------------------------------------------------------------------


def test_unknown_subcommand_exits_2(capsys):
    code, _, err = run(["frobnicate"], capsys)
    assert code == 2 and "usage" in err


def test_missing_config_file_exits_2(capsys, tmp_path):
    code, _, err = run(["verify", "--config", str(tmp_path / "missing.yaml")], capsys)
    assert code == 2 and "cannot read config" in err


def test_bad_config_exits_2(capsys, tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("grid: {n: 7}\n", encoding="utf-8")
    code, _, err = run(["verify", "--config", str(path)], capsys)
    assert code == 2 and "grid.n" in err


def test_failing_checks_exit_1(capsys):
    code, out, err = run(["verify", "--set", "checks=[translation]", "--set", "metric.family=generic",
                          "--set", "phi.samples=1", "--set", "tolerances.identity_rel=1e-300"], capsys)
    assert code == 1 and "FAIL translation" in err
    report = json.loads(out)
    assert report["results"][0]["pass"] is False


def test_numerical_abort_exits_3(capsys):
    code, _, err = run(["eval", "--functional", "err", "--set", "metric.family=generic",
                        "--set", "phi.amplitude=0.9"], capsys)
    assert code == 3 and "numerical abort" in err


def test_inadmissible_verify_is_a_failure_not_a_crash(capsys):
    code, out, _ = run(["verify", "--set", "checks=[closed_vs_path]", "--set", "metric.family=generic",
                        "--set", "phi.amplitude=0.9"], capsys)
    assert code == 1
    row = json.loads(out)["results"][0]
    assert row["residual"] is None and "error" in row["detail"]


# --- outputs -----------------------------------------------------------------------


def test_eval_prints_value_and_leak(capsys):
    code, out, _ = run(["eval", "--functional", "mabuchi_closed", "--set", "metric.family=generic"], capsys)
    assert code == 0
    row = json.loads(out)["results"][0]
    assert row["functional"] == "mabuchi_closed"
    assert isinstance(row["value"], float) and 0 <= row["imag_leak"] <= 1e-10


def test_verify_csv(capsys, tmp_path):
    path = tmp_path / "r.csv"
    code, out, err = run(["verify", "--set", "checks=[translation,condition_table]",
                          "--set", "phi.samples=1", "--set", "output.format=csv",
                          "--set", f"output.path={path}"], capsys)
    assert code == 0 and out == ""
    text = path.read_text(encoding="utf-8")
    assert text.splitlines()[0] == "check,scenario,lhs,rhs,residual,tol,pass"
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 3 + 4
    assert all(r["pass"] == "true" for r in rows)


def test_verify_json_schema_and_determinism(capsys):
    argv = ["verify", "--set", "checks=[translation]", "--set", "phi.samples=1"]
    _, out1, _ = run(argv, capsys)
    _, out2, _ = run(argv, capsys)
    r1, r2 = json.loads(out1), json.loads(out2)
    assert set(r1["meta"]) >= {"config", "versions", "timestamp"}
    for row in r1["results"]:
        assert {"check", "scenario", "lhs", "rhs", "residual", "tol", "pass"} <= set(row)
    assert r1["results"] == r2["results"]
    r1["meta"].pop("timestamp"), r2["meta"].pop("timestamp")
    assert r1 == r2


def test_converge_csv(capsys):
    code, out, _ = run(["converge", "--sizes", "8,16", "--set", "phi.samples=1",
                        "--set", "output.format=csv"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "n,residual,lhs,rhs,pass" and len(lines) == 3


def test_converge_bad_sizes(capsys):
    assert run(["converge", "--sizes", "16,8"], capsys)[0] == 2
    assert run(["converge", "--sizes", "7"], capsys)[0] == 2
    assert run(["converge", "--sizes", "a,b"], capsys)[0] == 2


def test_gauduchon_subcommand(capsys, tmp_path):
    save = tmp_path / "u.npy"
    code, out, _ = run(["gauduchon", "--set", "metric.family=generic", "--save", str(save)], capsys)
    assert code == 0
    row = json.loads(out)["results"][0]
    assert row["residual"] <= 1e-9 and row["min_u"] > 0
    assert row["mean_u"] == pytest.approx(1.0)
    assert np.load(save).shape == (16, 16, 16, 16)


def test_gauduchon_non_convergence_exits_3(capsys):
    code, _, err = run(["gauduchon", "--set", "metric.family=generic", "--tol", "1e-30",
                        "--max-iter", "1"], capsys)
    assert code == 3 and "GauduchonSolveError" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hermitian_energy", "--version"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.strip()


def test_verify_default_config_passes(capsys, tmp_path):
    path = tmp_path / "report.json"
    code, _, err = run(["verify", "--config", "default", "--set", f"output.path={path}"], capsys)
    assert code == 0, err
    report = json.loads(path.read_text(encoding="utf-8"))
    names = {r["check"] for r in report["results"]}
    assert names == set(cli.CHECK_NAMES)
    assert all(r["pass"] for r in report["results"])
    assert report["meta"]["aubin_yau_constants"] == pytest.approx([2.0] * 4, abs=1e-12)
