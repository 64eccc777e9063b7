from __future__ import annotations

import json

import pytest

from ucscreen.cli import DEFAULTS, ConfigError, RunConfig, main, parse_config
from ucscreen.cases import demo_config_text


def test_bundled_config_parses():
    cfg = RunConfig.from_text(demo_config_text())
    assert cfg["screen.method"] == "d1-ucd"
    assert cfg.solver().mip_gap == 0.0


def test_unknown_key_is_an_error():
    with pytest.raises(ConfigError, match="bound.detla"):
        parse_config("[bound]\ndetla = 3.0\n")


def test_type_errors():
    with pytest.raises(ConfigError):
        parse_config('[bound]\ndelta = "3"\n')
    with pytest.raises(ConfigError):
        parse_config("[solver]\nwarm_start = 1\n")


def test_int_accepted_for_float():
    assert parse_config("[bound]\ndelta = 3\n")["bound.delta"] == 3.0


def test_kind_must_match_method():
    with pytest.raises(ConfigError):
        RunConfig.from_text('[uncertainty]\nkind = "p2"\n[screen]\nmethod = "d1-ucd"\n')


def test_defaults_cover_documented_keys():
    for key in ("solver.mip_gap", "uncertainty.kind", "bound.delta", "bound.gamma", "bound.mode"):
        assert key in DEFAULTS


def test_subcommands_end_to_end(tmp_path, capsys):
    d = tmp_path
    assert main(["gen-data", "--network", "demo", "--eta", "0.1", "--samples", "120", "--seed", "4", "--out", str(d / "data")]) == 0
    assert main(["uncertainty", "--network", "demo", "--scenarios", str(d / "data"), "--kind", "p1", "--k", "2", "--out", str(d / "set.json")]) == 0
    assert json.loads((d / "set.json").read_text())["K"] == 2
    assert main(["cost-bound", "log", "--network", "demo", "--scenarios", str(d / "data"), "--samples", "40", "--out", str(d / "log.csv")]) == 0
    assert main(["cost-bound", "fit", "--uc-log", str(d / "log.csv"), "--delta", "0", "--gamma", "0.5", "--out", str(d / "bound.json")]) == 0
    assert json.loads((d / "bound.json").read_text())["gamma"] == 0.5
    assert main(["screen", "--network", "demo", "--set", str(d / "set.json"), "--method", "d1-ucd", "--out", str(d / "result.json")]) == 0
    assert main(["screen", "--network", "demo", "--set", str(d / "set.json"), "--method", "ed-d1-ucd", "--bound", str(d / "bound.json"), "--blocks", "2", "--out", str(d / "ed.json")]) == 0
    result = json.loads((d / "result.json").read_text())
    assert len(result["labels"]) == 12
    assert main(["uc", "solve", "--network", "demo", "--demand", f"{d / 'data' / 'observations.csv'}:3", "--retained", str(d / "result.json"), "--out", str(d / "uc.json")]) == 0
    sol = json.loads((d / "uc.json").read_text())
    assert sol["status"] == "Optimal" and sol["violations"] == []
    assert main(["evaluate", "--network", "demo", "--scenarios", str(d / "data"), "--method", "b-ucd", "--test-instances", "10", "--out", str(d / "report.json")]) == 0
    report = json.loads((d / "report.json").read_text())
    assert report["n_instances"] == 10 and report["n_infeasible"] == 0
    capsys.readouterr()
    assert main(["oracle", "redundancy", "--network", "demo", "--line", "6", "--dir", "-", "--set", str(d / "set.json")]) == 0
    assert capsys.readouterr().out.strip() in ("Redundant", "Irredundant")


def test_pipeline_stage_failure(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text(f'[paths]\nscenarios = "{tmp_path / "missing"}"\nout = "{tmp_path / "out"}"\n')
    assert main(["pipeline", "--config", str(cfg)]) == 1
    assert "stage 'data'" in capsys.readouterr().err
    assert (tmp_path / "out").is_dir()


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("nonsense = 1\n")
    assert main(["pipeline", "--config", str(cfg)]) == 2
    assert "unknown config keys" in capsys.readouterr().err
