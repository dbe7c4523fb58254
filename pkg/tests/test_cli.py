import json
import subprocess
import sys

import pytest

from ftkl.cli import PARAMS, main, parse_config, UsageError


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_fock_config_resolution():
    cfg = parse_config(["fock", "--r", "4", "--t", "1", "--nmax", "40"])
    assert cfg.command == "fock"
    assert cfg.parameters["r"] == 4 and cfg.parameters["t"] == 1.0 and cfg.parameters["nmax"] == 40
    assert cfg.parameters["phi0"] == ""  # radial weight


def test_flag_overrides_file(tmp_path):
    conf = tmp_path / "run.cfg"
    conf.write_text("# scale\nt=1\nnmax = 30\n")
    cfg = parse_config(["fock", "--config", str(conf), "--t", "16"])
    assert cfg.parameters["t"] == 16.0
    assert cfg.parameters["nmax"] == 30


def test_unknown_config_key(tmp_path):
    conf = tmp_path / "run.cfg"
    conf.write_text("t=1\nbogus=3\n")
    with pytest.raises(UsageError):
        parse_config(["fock", "--config", str(conf)])


@pytest.mark.parametrize(
    "argv",
    [
        ["egg", "--k", "0"],
        ["fock", "--bogus", "1"],
        ["fock", "--t", "abc"],
        ["spectral", "--t", "1,-2"],
        ["fit"],
        ["bundle", "--mode", "nope"],
        [],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 2
    assert err


def test_help_lists_every_parameter_with_default(capsys):
    for cmd, params in PARAMS.items():
        with pytest.raises(SystemExit):
            parse_config([cmd, "--help"])
        text = capsys.readouterr().out
        for p in params:
            assert "--" + p.name.replace("_", "-") in text
        assert text.count("[default:") >= len(params)


def test_scaling_envelope(capsys):
    code, out, _ = run(["scaling", "--r", "4", "--t", "1,16,256"], capsys)
    assert code == 0
    env = json.loads(out)
    assert set(env) == {"config", "results", "certificates", "timings"}
    assert env["results"]["deviation"] <= 1e-6
    assert env["certificates"]["err_est"] >= 0
    assert env["config"]["parameters"]["nmax"] == 48  # defaults echoed


def test_coarse_mesh_exit_3(capsys):
    code, _, err = run(["spectral", "--r", "2", "--t", "1", "--mesh", "50"], capsys)
    assert code == 3
    diag = json.loads(err)
    assert diag["error"] == "AccuracyError"
    assert diag["diagnostics"]["refined"] == 100


def test_certification_failure_exit_1(capsys):
    code, out, _ = run(
        ["normalform", "--p", "x1**4", "--R", "x1*x3;x2**3;x3**2", "--gauge", "kill_zeta_pure"], capsys
    )
    assert code == 1
    assert json.loads(out)["certificates"]["checks"]["phi0_real"] is False


def test_normalform_remainder_file(tmp_path, capsys):
    rfile = tmp_path / "R.txt"
    rfile.write_text("x1/3 + x2*x3/2\nx2**2\n5*x3*x1/7\n")
    out = tmp_path / "nf.json"
    code, _, _ = run(["normalform", "--p", "x1**4", "--R", str(rfile), "--out", str(out)], capsys)
    assert code == 0
    env = json.loads(out.read_text())
    assert all(v == 0 for v in env["certificates"]["residuals"].values())
    assert env["results"]["phi0"] == ["4 0 1/1 0/1"]


def test_configuration_error_exit_2(capsys):
    code, _, err = run(["neumann", "--cutoff", "0.1"], capsys)
    assert code == 2
    assert json.loads(err)["error"] == "ConfigurationError"


def test_csv_is_deterministic_and_ordered(tmp_path, capsys, monkeypatch):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    monkeypatch.setenv("FTKL_THREADS", "3")
    assert run(["spectral", "--t", "1,10,100", "--format", "csv", "--output", str(a)], capsys)[0] == 0
    monkeypatch.setenv("FTKL_THREADS", "1")
    assert run(["spectral", "--t", "100,1,10", "--format", "csv", "--output", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()
    data = a.read_bytes()
    assert b"\r" not in data and data.endswith(b"\n")
    assert data.splitlines()[0] == b"t,lambda_min_pos"
    assert [float(line.split(b",")[0]) for line in data.splitlines()[1:]] == [1.0, 10.0, 100.0]


def test_egg_then_fit_round_trip(tmp_path, capsys):
    samples = tmp_path / "egg.csv"
    assert run(["egg", "--k", "2", "--format", "csv", "--output", str(samples)], capsys)[0] == 0
    code, out, _ = run(["fit", "--input", str(samples), "--r", "4"], capsys)
    assert code == 0
    res = json.loads(out)["results"]
    assert res["exponent"] == pytest.approx(2.5, abs=1e-3)
    assert res["fit"]["a"][0] == pytest.approx(0.15198177546, rel=1e-6)


@pytest.mark.parametrize(
    "argv",
    [
        ["fock", "--points", "2", "--nmax", "20"],
        ["bundle", "--mode", "phase", "--m", "1,2,3,4,5,6"],
        ["bundle", "--mode", "psc", "--m", "50,100,200,400"],
        ["neumann", "--nmax", "24"],
    ],
)
def test_commands_succeed(argv, capsys):
    code, out, _ = run(argv, capsys)
    assert code == 0
    assert json.loads(out)["certificates"]["certified"] is True


def test_console_script_accept(tmp_path):
    out1, out2 = tmp_path / "one", tmp_path / "two"
    for d in (out1, out2):
        proc = subprocess.run(
            [sys.executable, "-m", "ftkl.cli", "accept", "--outdir", str(d), "--format", "csv"],
            capture_output=True, text=True, timeout=300,
        )
        assert proc.returncode == 0, proc.stderr
        assert proc.stderr.count("[PASS]") == 10
    files = sorted(p.name for p in out1.iterdir())
    assert "sha256.csv" in files and len(files) == 10
    for name in files:
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
