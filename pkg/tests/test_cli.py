import json
from importlib import resources

import numpy as np
import pytest

from seirvac import __version__
from seirvac.cli import (
    SCHEMA,
    config_echo,
    load_config,
    main,
    parse_config,
)
from seirvac.simulate import (
    CSV_COLUMNS,
    SCENARIO_GAINS,
    ConfigurationError,
    scenario_config,
)


def preset_text(name: str) -> str:
    return (
        resources.files("seirvac").joinpath(f"presets/{name}.cfg").read_text()
    )


MINIMAL = "[sim]\nduration = 5.0\n"


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------


def test_empty_document_is_all_defaults():
    parsed = load_config("")
    assert parsed.config == scenario_config("A")
    n_keys = sum(len(keys) for keys in SCHEMA.values())
    assert len(parsed.defaults_applied) == n_keys == 37
    assert "plant.mu = 0.00425531914893617 (default)" in parsed.defaults_applied


def test_explicit_values_are_not_reported_as_defaults():
    parsed = load_config("[plant]\nmu = 0.004\ns0 = 401.0\ne0 = 49.0\n")
    assert parsed.config.plant.mu == 0.004
    assert parsed.config.plant_init.s == 401.0
    for explicit in ("plant.mu ", "plant.s0 ", "plant.e0 "):
        assert all(not d.startswith(explicit) for d in parsed.defaults_applied)
    assert any(d.startswith("plant.omega ") for d in parsed.defaults_applied)


def test_comments_blank_lines_and_case_are_tolerated():
    text = "# leading comment\n\n; alt comment\n[PLANT]\nMU = 0.005\n"
    assert load_config(text).config.plant.mu == 0.005


@pytest.mark.parametrize(
    "text,needle",
    [
        ("[plant]\nbogus = 1\n", "line 2: unknown key 'bogus' in section [plant]"),
        ("[nope]\n", "line 1: unknown section [nope]"),
        ("[plant]\nmu = 1\nmu = 2\n", "line 3: duplicate key 'mu' in section [plant]"),
        ("[plant]\nmu = abc\n", "line 2: invalid float value for 'mu': 'abc'"),
        ("mu = 1\n", "line 1: key outside any known section"),
        ("[plant]\njunk\n", "line 2: expected key=value"),
        ("[sim]\nclamp_v = maybe\n",
         "line 2: invalid bool value for 'clamp_v': 'maybe'"),
    ],
)
def test_parse_errors_carry_line_numbers(text, needle):
    with pytest.raises(ConfigurationError) as exc_info:
        load_config(text)
    assert needle in str(exc_info.value)


def test_all_parse_problems_are_collected():
    text = "[plant]\nbogus = 1\nmu = abc\n"
    with pytest.raises(ConfigurationError) as exc_info:
        load_config(text)
    message = str(exc_info.value)
    assert "line 2" in message and "line 3" in message


def test_semantic_problems_are_named():
    with pytest.raises(ConfigurationError, match="conservation"):
        load_config("[plant]\nn_total = 500\n")


def test_boolean_spellings():
    for raw, expected in [("1", True), ("true", True), ("YES", True),
                          ("on", True), ("0", False), ("false", False),
                          ("No", False), ("off", False)]:
        cfg = parse_config(f"[sim]\nclamp_v = {raw}\n")
        assert cfg.clamp_v is expected


def test_observer_shares_plant_population():
    cfg = parse_config("[plant]\nn_total = 2000\ns0 = 1400\nr0 = 500\n"
                       "[observer]\ns0 = 1250\nr0 = 450\n")
    assert cfg.observer.n_total == 2000.0
    assert cfg.plant.n_total == 2000.0


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("name,scenario", [
    ("scenario_a", "A"), ("scenario_b", "B"), ("scenario_c", "C"),
])
def test_presets_reproduce_scenario_configs(name, scenario):
    assert parse_config(preset_text(name)) == scenario_config(scenario)


def test_scenario_c_preset_gains_are_exact():
    assert parse_config(preset_text("scenario_c")).gains == SCENARIO_GAINS


def test_tracking_preset_parses():
    cfg = parse_config(preset_text("scenario_tracking"))
    assert cfg.law == "tracking"
    assert cfg.clamp_v is False
    assert cfg.duration == 2500.0
    muh = cfg.observer.mu_hat
    assert cfg.tracking is not None
    assert cfg.tracking.g_max == pytest.approx(10.0 * muh, rel=1e-15)
    assert cfg.tracking.g_init == muh
    assert cfg.tracking.horizon_t == 1500.0
    assert cfg.problems() == []


def test_config_echo_round_trips_through_schema():
    cfg = parse_config(preset_text("scenario_tracking"))
    echo = config_echo(cfg)
    assert set(echo) == set(SCHEMA)
    for sec, keys in SCHEMA.items():
        assert set(echo[sec]) == set(keys)
    assert echo["tracking"]["g_max"] == cfg.tracking.g_max
    assert echo["sim"]["law"] == "tracking"
    # echoing a non-tracking config falls back to the schema defaults
    echo_a = config_echo(scenario_config("A"))
    assert echo_a["tracking"]["g_max"] == SCHEMA["tracking"]["g_max"][1]


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def test_simulate_command_writes_artifacts(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text(MINIMAL)
    out = tmp_path / "out"
    rc = main(["simulate", "--config", str(cfg_path), "--out", str(out)])
    assert rc == 0

    csv_text = (out / "trajectory.csv").read_text().splitlines()
    assert csv_text[0] == ",".join(CSV_COLUMNS)
    assert len(csv_text) == 1 + 6  # header + samples at t = 0..5

    report = (out / "report.txt").read_text()
    for heading in ("# stability certificate", "# run diagnostics",
                    "# trajectory vs certificate"):
        assert heading in report
    assert "hinf_value = " in report

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["version"] == __version__
    assert manifest["config_path"] == str(cfg_path)
    assert manifest["artifacts"] == ["trajectory.csv", "report.txt",
                                     "manifest.json"]
    assert manifest["config"]["sim"]["duration"] == 5.0
    assert any(d.startswith("plant.mu ") for d in manifest["defaults_applied"])
    assert manifest["runtime_seconds"] >= 0.0


def test_simulate_command_is_deterministic(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text(MINIMAL)
    rc1 = main(["simulate", "--config", str(cfg_path),
                "--out", str(tmp_path / "one")])
    rc2 = main(["simulate", "--config", str(cfg_path),
                "--out", str(tmp_path / "two")])
    assert rc1 == rc2 == 0
    first = (tmp_path / "one" / "trajectory.csv").read_bytes()
    second = (tmp_path / "two" / "trajectory.csv").read_bytes()
    assert first == second


def test_simulate_command_dat_output(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text(MINIMAL)
    out = tmp_path / "out"
    rc = main(["simulate", "--config", str(cfg_path), "--out", str(out),
               "--dat"])
    assert rc == 0
    dat_lines = (out / "trajectory.dat").read_text().splitlines()
    assert dat_lines[0] == "# " + " ".join(CSV_COLUMNS)
    dat = np.loadtxt(out / "trajectory.dat")
    csv = np.loadtxt(out / "trajectory.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(dat, csv)
    manifest = json.loads((out / "manifest.json").read_text())
    assert "trajectory.dat" in manifest["artifacts"]


def test_simulate_command_rejects_missing_file(tmp_path, capsys):
    rc = main(["simulate", "--config", str(tmp_path / "absent.cfg"),
               "--out", str(tmp_path / "out")])
    assert rc == 1
    assert "cannot read config" in capsys.readouterr().err


def test_simulate_command_reports_config_errors(tmp_path, capsys):
    cfg_path = tmp_path / "bad.cfg"
    cfg_path.write_text("[plant]\nbogus = 1\n")
    rc = main(["simulate", "--config", str(cfg_path),
               "--out", str(tmp_path / "out")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "invalid configuration" in err
    assert "line 2: unknown key 'bogus' in section [plant]" in err
    assert not (tmp_path / "out").exists()


def test_simulate_command_numerical_abort_exit_code(tmp_path, capsys):
    cfg_path = tmp_path / "blowup.cfg"
    cfg_path.write_text("[plant]\nbeta = 1e300\n[sim]\nduration = 5.0\n")
    rc = main(["simulate", "--config", str(cfg_path),
               "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "non-finite state" in capsys.readouterr().err


def test_analyze_command_prints_certificate_and_feasibility(tmp_path, capsys):
    cfg_path = tmp_path / "c.cfg"
    cfg_path.write_text(preset_text("scenario_c"))
    rc = main(["analyze", "--config", str(cfg_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "# stability certificate" in out
    assert "hinf_value = 0.454377156073844" in out
    assert "# gain feasibility" in out
    assert "char_all = True" in out
    assert "obs_pert_all = True" in out
    assert "plant_pert_all = False" in out


def test_scenarios_command_builds_summary(tmp_path, capsys):
    out = tmp_path / "batch"
    rc = main(["scenarios", "--out", str(out)])
    assert rc == 0
    for name in ("A", "B", "C"):
        assert (out / name / "trajectory.csv").exists()
        assert (out / name / "report.txt").exists()
        assert (out / name / "manifest.json").exists()
    lines = (out / "summary.csv").read_text().splitlines()
    assert lines[0] == (
        "scenario,final_err_norm,max_drift_plant,max_drift_observer,"
        "min_component,plant_violation_steps,observer_violation_steps,"
        "clamped_steps,fallback_steps"
    )
    assert len(lines) == 4
    rows = {ln.split(",")[0]: ln.split(",") for ln in lines[1:]}
    assert set(rows) == {"A", "B", "C"}
    # convergence ordering: matched observer beats the mismatched ones
    assert float(rows["A"][1]) < 1e-6
    assert float(rows["B"][1]) > 50.0
    assert int(rows["C"][7]) > 0  # the clamp engaged
    stdout = capsys.readouterr().out
    assert "scenario A" in stdout and "summary.csv" in stdout


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc_info:
        main(["--version"])
    assert exc_info.value.code == 0
    assert f"seirvac {__version__}" in capsys.readouterr().out


def test_subcommand_is_required():
    with pytest.raises(SystemExit) as exc_info:
        main([])
    assert exc_info.value.code == 2
