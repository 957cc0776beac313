# -*- coding: utf-8 -*-
import json

import pytest

from app import build_parser, main
from src.experiments import COMMANDS


def test_parser_lists_every_command():
    parser = build_parser()
    for command in COMMANDS:
        assert parser.parse_args([command]).command == command
    with pytest.raises(SystemExit):
        parser.parse_args(["nope"])


def test_ladder_run_writes_manifest(tmp_path):
    out = tmp_path / "ladder"
    config = tmp_path / "ladder.cfg"
    config.write_text("levels = 2\n", encoding="utf-8")
    assert main(["ladder", "--config", str(config), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["command"] == "ladder"
    assert manifest["passed"] is True
    assert "ladder.csv" in manifest["outputs"]
    assert manifest["metrics"]["delta_ratios"][0]["level"] == 2


def test_config_error_exit_code_and_payload(tmp_path):
    out = tmp_path / "bad"
    config = tmp_path / "bad.cfg"
    config.write_text("depth = 3\n", encoding="utf-8")
    assert main(["ladder", "--config", str(config), "--out", str(out)]) == 2
    payload = json.loads((out / "error.json").read_text(encoding="utf-8"))
    assert payload["error"] == "config_error"
    assert "depth" in payload["message"]


def test_pliss_runs_are_deterministic(tmp_path):
    config = tmp_path / "pliss.cfg"
    config.write_text("trials = 5\nN = 50\nmax_exhaustive = 6\n", encoding="utf-8")
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert main(["pliss", "--config", str(config), "--out", str(out), "--seed", "42"]) == 0
        outputs.append((out / "pliss.csv").read_text(encoding="utf-8"))
    assert outputs[0] == outputs[1]


def test_report_over_runs(tmp_path):
    runs = tmp_path / "runs"
    assert main(["ladder", "--out", str(runs / "ladder")]) == 0
    config = tmp_path / "report.cfg"
    config.write_text(f"manifests = {runs}\n", encoding="utf-8")
    out = tmp_path / "summary"
    assert main(["report", "--config", str(config), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["criteria_evaluated"] == 1
    assert summary["criteria"][0]["id"] == 1
    assert (out / "summary.md").exists()


def test_missing_manifest_is_a_config_error(tmp_path):
    config = tmp_path / "report.cfg"
    config.write_text(f"manifests = {tmp_path / 'nowhere.json'}\n", encoding="utf-8")
    assert main(["report", "--config", str(config), "--out", str(tmp_path / "summary")]) == 2
