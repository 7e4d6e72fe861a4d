import json
import subprocess
import sys

import pytest

from qeasplit.cli import PHASES, SCHEMA, ConfigError, ExperimentConfig, main, preset, run, strip_timings


@pytest.fixture(scope="module")
def tiny_report():
    return run(preset("tiny"))


def test_tiny_preset_passes_every_phase(tiny_report):
    assert tiny_report["schema"] == SCHEMA
    assert list(tiny_report["phases"]) == list(PHASES)
    failed = {k: v for k, v in tiny_report["phases"].items() if not v["passed"]}
    assert not failed
    assert tiny_report["passed"]


def test_report_facts(tiny_report):
    phases = tiny_report["phases"]
    assert phases["setalg"]["facts"]["atoms"] == 54
    assert phases["split"]["facts"]["atoms"] == 58
    assert phases["witness"]["facts"]["refutation"] == {"certificate": 50, "violation": 50}
    assert phases["witness"]["facts"]["search"]["split"]["result"] == "ExhaustedNone"
    assert phases["witness"]["facts"]["search"]["base"]["result"] == "Found"
    assert phases["nondiag"]["facts"]["families_failed"] == ["diag"]
    assert tiny_report["warnings"]


def test_reports_are_deterministic(tiny_report):
    again = run(preset("tiny"))
    assert json.dumps(strip_timings(again)) == json.dumps(strip_timings(tiny_report))


def test_presets():
    assert preset("bounds").phases == ["bounds"]
    with pytest.warns(UserWarning):
        small = preset("small")
    assert small.dimension == 5 and small.m == 4
    with pytest.raises(ConfigError):
        preset("huge")


@pytest.mark.parametrize("changes", [
    {"dimension": 2, "blocks": [2, 2], "m": 2},
    {"phases": ["teleport"]},
    {"blocks": [2, 2]},
    {"blocks": [1, 2, 2], "phases": ["partitions"]},
    {"n": 4},
    {"m": 0},
])
def test_validation_rejects(changes):
    cfg = preset("tiny")
    for key, value in changes.items():
        setattr(cfg, key, value)
    with pytest.raises(ConfigError):
        cfg.validate()


def test_unknown_config_field():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json({"dimension": 3, "blocks": [2, 2, 2], "m": 2, "n": 2, "colour": "red"})


def test_phase_subset_runs_only_those():
    cfg = preset("tiny")
    cfg.phases = ["setalg"]
    report = run(cfg)
    assert list(report["phases"]) == ["setalg"] and report["passed"]


def test_bounds_preset():
    report = run(preset("bounds"))
    facts = report["phases"]["bounds"]["facts"]
    assert report["passed"] and facts["bound"] == 16 and facts["max_blocks"] <= 16


def test_main_run_and_exit_codes(tmp_path, capsys):
    out, alg = tmp_path / "r.json", tmp_path / "a.json"
    assert main(["run", "--preset", "tiny", "--phases", "setalg,split", "--report", str(out),
                 "--save-algebra", str(alg)]) == 0
    report = json.loads(out.read_text())
    assert set(report["phases"]) == {"setalg", "split"}
    assert "PASS" in capsys.readouterr().err
    assert main(["run", "--preset", "nope"]) == 2

    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"dimension": 2, "blocks": [2, 2], "m": 2, "n": 2}))
    assert main(["run", "--config", str(cfg)]) == 2

    capsys.readouterr()
    assert main(["check-eq", "--algebra", str(alg), "--eq", "c0(c1(x0)) = c1(c0(x0))"]) == 0
    assert json.loads(capsys.readouterr().out)["holds"] is True
    assert main(["check-eq", "--algebra", str(alg), "--eq", "c0(x0) = x0"]) == 1
    assert main(["check-eq", "--algebra", str(alg), "--eq", "c0(x0 = x0"]) == 2
    assert main(["check-eq", "--algebra", str(alg), "--eq", "c0(x0) = x0", "--strategy", "sampled",
                 "--samples", "20", "--seed", "1"]) == 1


def test_config_file_run(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"dimension": 3, "blocks": [2, 2, 2], "m": 2, "n": 2,
                               "phases": ["split", "partitions"]}))
    assert main(["run", "--config", str(cfg), "--report", str(tmp_path / "r.json")]) == 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qeasplit", "run", "--preset", "bounds"],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["passed"]
