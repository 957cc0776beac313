# -*- coding: utf-8 -*-
from pathlib import Path

import pytest

from src.errors import ConfigError
from src.settings import build_config, load_config, parse_config_text, parse_value


def test_parse_value_types():
    assert parse_value(" 8 ") == 8
    assert parse_value("1e-12") == 1e-12
    assert parse_value("0.0, 0.1,0.2") == [0.0, 0.1, 0.2]
    assert parse_value("compensated") == "compensated"
    assert parse_value("runs/a,runs/b") == "runs/a,runs/b"


def test_parse_config_text_skips_comments():
    params = parse_config_text("# ladder run\nlevels = 10  # deep\n\ntolerance=1e-13\n")
    assert params == {"levels": 10, "tolerance": 1e-13}


@pytest.mark.parametrize("text", ["levels 10", "= 3", "levels = 1\nlevels = 2"])
def test_parse_config_text_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_build_config_fills_defaults():
    config = build_config("ladder", {"levels": 4})
    assert config.get("levels") == 4
    assert config.get("tolerance") == 1e-12
    assert config.seed == 0
    assert config.output_dir.name == "ladder"


def test_build_config_coerces_lists_and_floats():
    config = build_config("boundary", {"b": 0.1, "step": 1})
    assert config.get("b") == [0.1]
    assert config.get("step") == 1.0
    assert isinstance(config.get("step"), float)


@pytest.mark.parametrize("command,params", [
    ("nope", {}),
    ("ladder", {"depth": 3}),
    ("ladder", {"levels": 2.5}),
    ("ladder", {"precision": "quad"}),
    ("ladder", {"seed": "x"}),
])
def test_build_config_rejects(command, params):
    with pytest.raises(ConfigError):
        build_config(command, params)


def test_cli_overrides_win():
    config = build_config("pliss", {"seed": 3, "precision": "standard"}, seed=11, precision="compensated",
                          output_dir="elsewhere")
    assert config.seed == 11
    assert config.precision == "compensated"
    assert config.output_dir == Path("elsewhere")


def test_config_hash_is_stable_and_sensitive():
    a = build_config("tower", {"N": 3})
    b = build_config("tower", {"N": 3, "b": 0.2})
    c = build_config("tower", {"N": 4})
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != c.config_hash()
    assert a.config_hash() != build_config("tower", {"N": 3}, seed=1).config_hash()


def test_load_config_from_file(tmp_path):
    path = tmp_path / "ladder.cfg"
    path.write_text("levels = 3\nseed = 5\n", encoding="utf-8")
    config = load_config(path, "ladder")
    assert config.get("levels") == 3
    assert config.seed == 5
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg", "ladder")
    assert load_config(None, "ladder").get("levels") == 8


SHIPPED_CONFIGS = sorted((Path(__file__).resolve().parent.parent / "configs").glob("*.cfg"))


@pytest.mark.parametrize("path", SHIPPED_CONFIGS, ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    config = load_config(path, path.stem.split("_")[0])
    assert config.command == path.stem.split("_")[0]


def test_order_configs_cover_both_jacobians():
    configs = {p.stem: load_config(p, "order") for p in SHIPPED_CONFIGS if p.stem.startswith("order")}
    assert configs["order"].get("b") == 0.1
    assert configs["order"].get("max_piece_depth") == 6
    assert configs["order_b0"].get("b") == 0.0
    assert configs["order_b0"].get("max_piece_depth") == 8
