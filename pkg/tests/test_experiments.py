# -*- coding: utf-8 -*-
import pytest

from src.errors import ConfigError
from src.experiments import cached_boundary, run
from src.renorm_1d import accumulation_param
from src.settings import ExperimentConfig, build_config


def test_cached_boundary_round_trip(isolated_dirs):
    first = cached_boundary(0.0, 6)
    assert list((isolated_dirs / "cache" / "boundary").glob("*.json"))
    second = cached_boundary(0.0, 6)
    assert second == first
    assert second.a_star == pytest.approx(accumulation_param(6), abs=1e-15)


def test_boundary_run_at_zero(isolated_dirs):
    config = build_config("boundary", {"b": 0.0, "max_level": 6}, output_dir=isolated_dirs / "boundary")
    manifest = run(config)
    assert manifest.passed
    assert [c["id"] for c in manifest.checks] == [2, 2]
    assert (isolated_dirs / "boundary" / "boundary.csv").exists()


def test_unknown_command_is_rejected(tmp_path):
    with pytest.raises(ConfigError):
        run(ExperimentConfig("nope", output_dir=tmp_path))


@pytest.mark.slow
def test_tower_run_on_degenerate_map(isolated_dirs):
    config = build_config("tower", {"b": 0.0, "N": 3, "max_level": 6}, output_dir=isolated_dirs / "tower")
    manifest = run(config)
    assert manifest.checks
    assert "tower.csv" in manifest.outputs


def _ids(manifest):
    return sorted({c["id"] for c in manifest.checks})


@pytest.mark.slow
def test_normalform_run_on_degenerate_map(isolated_dirs):
    config = build_config("normalform", {"b": 0.0, "max_level": 8, "sample_length": 16384},
                          output_dir=isolated_dirs / "normalform")
    manifest = run(config)
    assert manifest.passed
    assert any(c["name"] == "degenerate residual below 1e-8" for c in manifest.checks)
    assert {"normalform.csv", "charts.json"} <= set(manifest.outputs)


@pytest.mark.slow
def test_pinch_run_on_degenerate_map(isolated_dirs):
    config = build_config("pinch", {"b": 0.0, "sample": 300, "max_level": 8}, output_dir=isolated_dirs / "pinch")
    manifest = run(config)
    assert manifest.passed
    assert _ids(manifest) == [7]


@pytest.mark.slow
def test_order_run_on_degenerate_map(isolated_dirs):
    overrides = {"b": 0.0, "depth": 6, "max_piece_depth": 6, "sample_length": 8192, "states": 2000,
                 "trees": 5, "max_leaves": 30, "max_level": 8}
    manifest = run(build_config("order", overrides, output_dir=isolated_dirs / "order"))
    assert manifest.passed
    assert _ids(manifest) == [8, 9, 10]
    assert "connectedness.csv" in manifest.outputs


@pytest.mark.slow
def test_lyapunov_run_on_degenerate_map(isolated_dirs):
    config = build_config("lyapunov", {"b": 0.0, "length": 20000, "max_level": 8},
                          output_dir=isolated_dirs / "lyapunov")
    manifest = run(config)
    assert manifest.passed
    assert [c["name"] for c in manifest.checks] == ["|χ1| < 0.05", "degenerate χ2 = -inf"]


@pytest.mark.slow
def test_unicrit_run(isolated_dirs):
    manifest = run(build_config("unicrit", {}, output_dir=isolated_dirs / "unicrit"))
    assert manifest.passed
    assert "unicrit.csv" in manifest.outputs


@pytest.mark.slow
def test_denjoy_run_on_degenerate_map(isolated_dirs):
    config = build_config("denjoy", {"b": 0.0, "segments": 5, "max_level": 8}, output_dir=isolated_dirs / "denjoy")
    manifest = run(config)
    assert _ids(manifest) == [12]
    assert (isolated_dirs / "denjoy" / "manifest.json").exists()
