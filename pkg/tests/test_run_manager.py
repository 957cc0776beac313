# -*- coding: utf-8 -*-
import json
import math

import numpy as np
import pytest

from src.run_manager import (MANIFEST_NAME, UNITS_NOTE, ReportComposer, ResultCache, RunManager, RunManifest,
                             build_summary, decode_value, encode_value)
from src.settings import build_config


def test_encode_value_handles_non_finite_and_numpy():
    data = {"a": math.inf, "b": [-math.inf, np.float64(0.5)], "c": np.arange(2), "d": np.bool_(True), 1: math.nan}
    encoded = encode_value(data)
    assert encoded == {"a": "inf", "b": ["-inf", 0.5], "c": [0, 1], "d": True, "1": "nan"}
    json.dumps(encoded)
    decoded = decode_value(encoded)
    assert decoded["a"] == math.inf and decoded["b"][0] == -math.inf
    assert math.isnan(decoded["1"])


class TestRunManager:
    @pytest.fixture
    def manager(self, tmp_path):
        return RunManager(build_config("ladder", {"levels": 2}, output_dir=tmp_path / "ladder"))

    def test_csv_has_note_and_header(self, manager):
        path = manager.write_csv("t.csv", ["level", "value"], [{"level": 1, "value": -math.inf},
                                                              {"level": 2, "value": 0.25}])
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == UNITS_NOTE
        assert lines[1] == "level,value"
        assert lines[2] == "1,-inf"
        assert lines[3] == "2,0.25"

    def test_manifest_round_trip(self, manager):
        manager.write_json("data.json", {"x": math.inf})
        manager.check(1, "good", True, 1e-13)
        manager.check(3, "bad", False, math.nan, "too wide")
        manifest = manager.finalize({"a_star": -1.4})
        assert not manifest.passed
        assert manifest.outputs == ["data.json", MANIFEST_NAME]
        loaded = RunManifest.load(manager.out_dir / MANIFEST_NAME)
        assert loaded.command == "ladder"
        assert loaded.config_hash == manager.config.config_hash()
        assert loaded.checks[1]["detail"] == "too wide"
        assert not loaded.passed


class TestResultCache:
    def test_miss_then_hit(self, tmp_path):
        cache = ResultCache("boundary", root=tmp_path)
        assert cache.get("abc") is None
        cache.put("abc", {"a_star": -1.39, "residual": math.inf})
        assert cache.get("abc") == {"a_star": -1.39, "residual": math.inf}
        assert (tmp_path / "boundary" / "abc.json").exists()

    def test_corrupt_entry_is_a_miss(self, tmp_path):
        cache = ResultCache("boundary", root=tmp_path)
        (tmp_path / "boundary" / "bad.json").write_text("{not json", encoding="utf-8")
        assert cache.get("bad") is None


def _manifest(command, checks):
    return RunManifest(command, "h", "0", 0, "standard", {},
                       checks=[{"id": i, "name": f"c{i}", "passed": p, "value": None, "detail": ""}
                               for i, p in checks])


def test_summary_groups_by_criterion():
    summary = build_summary([_manifest("ladder", [(1, True)]), _manifest("tower", [(2, True), (3, False)]),
                             _manifest("boundary", [(2, True)])])
    assert summary["criteria_evaluated"] == 3
    assert summary["criteria_passed"] == 2
    assert [c["id"] for c in summary["criteria"]] == [1, 2, 3]
    assert summary["criteria"][1]["commands"] == ["tower", "boundary"]
    assert summary["missing_criteria"] == list(range(4, 13))


def test_empty_summary():
    summary = build_summary([])
    assert summary["criteria_evaluated"] == 0
    assert summary["missing_criteria"] == list(range(1, 13))


def test_report_template_renders():
    text = ReportComposer().compose(build_summary([_manifest("ladder", [(1, True)])]))
    assert "ladder" in text


def test_missing_template_gives_empty_report(tmp_path):
    assert ReportComposer(tmp_path / "none.j2").compose(build_summary([])) == ""
