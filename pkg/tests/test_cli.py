import json
import subprocess
import sys

import pytest

from sobolev_growth.experiment_cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from sobolev_growth.scenarios import (OUTDIR_ENV, SCENARIOS, ConfigError, load_scenario,
                                      parse_config_text, resolve_outdir)

SHIPPED = ["qho-baseline", "mono-linear", "mono-powerlog", "oscillatory", "forced-linear",
           "exponential-remark"]


def test_list_scenarios(capsys):
    assert main(["list-scenarios"]) == EXIT_OK
    out = capsys.readouterr().out
    for name in SHIPPED:
        assert name in out
    assert sorted(SCENARIOS) == sorted(SHIPPED)


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["check-rate", "no_such_rate"],
                                  ["simulate"], ["metaplectic-test", "--bogus"]])
def test_usage_errors(argv, capsys):
    assert main(argv) == EXIT_USAGE


def test_help_lists_defaults(capsys):
    assert main(["simulate", "--help"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "ode_tol" in out and "default 1e-10" in out and OUTDIR_ENV in out


def test_check_rate_exponential(capsys):
    assert main(["check-rate", "exponential", "0.5"]) == EXIT_FAIL
    assert "class M verdict: fails ratio_to_zero" in capsys.readouterr().out


def test_check_rate_linear_passes(capsys):
    assert main(["check-rate", "power_log", "1", "1", "0", "--horizon", "500",
                 "--hyp-horizon", "200"]) == EXIT_OK
    assert "class M verdict: pass" in capsys.readouterr().out


def test_check_rate_bad_params(capsys):
    assert main(["check-rate", "power_log", "1", "2", "3", "4"]) == EXIT_USAGE


def test_metaplectic_test(capsys):
    assert main(["metaplectic-test", "--seed", "1", "--count", "20"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and "group_law: PASS" in out


def test_appendix_integrals_power_log(capsys):
    assert main(["appendix-integrals", "power_log", "--horizon", "1000"]) == EXIT_OK
    out = capsys.readouterr().out
    for key in ("I1_band", "I2_ratio_sup", "I3_sup"):
        assert key in out


def test_appendix_horizon_too_short(capsys):
    assert main(["appendix-integrals", "power_log", "--horizon", "10"]) == EXIT_USAGE


# --- config parsing ----------------------------------------------------------

def test_parse_key_value():
    raw = parse_config_text("rate = power_log  # f(t) = t\nparams = 1, 1, 0\n\ns = 1 2\n")
    sc = load_scenario("mono-linear", None)
    assert raw == {"rate": "power_log", "params": "1, 1, 0", "s": "1 2"}
    assert sc.params == (1.0, 1.0, 0.0)


def test_parse_json_equivalent(tmp_path):
    kv = tmp_path / "a.cfg"
    kv.write_text("rate = power_log\nparams = 1,1,0\ns = 1,2\nduration = 20\n")
    js = tmp_path / "a.json"
    js.write_text(json.dumps({"rate": "power_log", "params": [1, 1, 0], "s": [1, 2],
                              "duration": 20, "name": "a"}))
    assert load_scenario(str(kv)) == load_scenario(str(js))


@pytest.mark.parametrize("text", ["rate power_log", "rate = a\nrate = b", "{not json",
                                  "[1, 2]", "frobnicate = 3", "dt = fast"])
def test_config_errors(text, tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_scenario(str(path))


def test_horizon_and_duration_exclusive():
    with pytest.raises(ConfigError):
        load_scenario("mono-linear", {"horizon": "100", "duration": "50"})


def test_horizon_converts_to_duration():
    sc = load_scenario("mono-linear", {"horizon": "100"})
    assert sc.duration == pytest.approx(100 - sc.build_rate().t0)


def test_simulate_bad_config_exit_2(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("rate = nope\n")
    assert main(["simulate", str(path), "--outdir", str(tmp_path)]) == EXIT_USAGE
    assert main(["simulate", "missing-scenario", "--outdir", str(tmp_path)]) == EXIT_USAGE


def test_outdir_resolution(monkeypatch, tmp_path):
    monkeypatch.setenv(OUTDIR_ENV, str(tmp_path / "env"))
    assert resolve_outdir(None) == tmp_path / "env"
    assert resolve_outdir(str(tmp_path / "cli")) == tmp_path / "cli"
    monkeypatch.delenv(OUTDIR_ENV)
    assert resolve_outdir(None).name == "sobolev_growth_out"


# --- simulate ------------------------------------------------------------

@pytest.fixture(scope="module")
def baseline_runs(tmp_path_factory):
    dirs = [tmp_path_factory.mktemp(f"run{k}") for k in range(2)]
    codes = [main(["simulate", "qho-baseline", "--outdir", str(d)]) for d in dirs]
    return codes, dirs


def test_simulate_baseline_all_pass(baseline_runs):
    codes, dirs = baseline_runs
    assert codes == [EXIT_OK, EXIT_OK]
    verdicts = json.loads((dirs[0] / "qho-baseline" / "verdicts.json").read_text())
    assert verdicts["all_pass"]
    assert "baseline_constant_s1" in verdicts["verdicts"]


def test_simulate_byte_identical(baseline_runs):
    _, (a, b) = baseline_runs
    files = sorted(p.name for p in (a / "qho-baseline").iterdir())
    assert {"classical.csv", "quantum.csv", "correspondence_s1.csv", "reports.json",
            "verdicts.json"} <= set(files)
    for name in files:
        assert (a / "qho-baseline" / name).read_bytes() == (b / "qho-baseline" / name).read_bytes()


def test_csv_schema(baseline_runs):
    _, (a, _) = baseline_runs
    lines = (a / "qho-baseline" / "quantum.csv").read_text().splitlines()
    assert lines[0] == "t,l2,sobolev_s1,tail_mass,N"
    assert len(lines[1].split(",")) == 5


def test_simulate_env_outdir_exit_mirrors_verdicts(monkeypatch, tmp_path, capsys):
    # short run via --set overrides and the env outdir; exit code mirrors verdicts.json
    monkeypatch.setenv(OUTDIR_ENV, str(tmp_path))
    code = main(["simulate", "mono-linear", "--set", "duration=4", "--set", "window_offset=1",
                 "--set", "oracle_window=4", "--set", "check_horizon=200"])
    out = capsys.readouterr().out
    assert (tmp_path / "mono-linear" / "verdicts.json").is_file()
    verdicts = json.loads((tmp_path / "mono-linear" / "verdicts.json").read_text())
    assert (code == EXIT_OK) == verdicts["all_pass"]
    assert "ALL PASS" in out or "SOME FAIL" in out


def test_console_script_entry():
    proc = subprocess.run([sys.executable, "-m", "sobolev_growth", "list-scenarios"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "forced-linear" in proc.stdout
