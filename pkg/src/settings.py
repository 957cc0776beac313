# -*- coding: utf-8 -*-
"""Environment, logging and experiment configuration."""

import hashlib
import logging
import os
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from dotenv import load_dotenv

from src.errors import ConfigError

load_dotenv()

LAB_VERSION = "0.4.0"

OUTPUT_DIR = Path(os.getenv("LAB_OUTPUT_DIR", "runs"))
CACHE_DIR = Path(os.getenv("LAB_CACHE_DIR", "cache"))
LOG_DIR = Path("logs")
LOG_LEVEL = os.getenv("LAB_LOG_LEVEL", "INFO").upper()
DEFAULT_PRECISION = os.getenv("LAB_PRECISION", "standard").lower()

logger = logging.getLogger(__name__)

_logging_ready = False


def configure_logging(level: Optional[str] = None) -> None:
    """Install file + console handlers once per process."""
    global _logging_ready
    if _logging_ready:
        return
    LOG_DIR.mkdir(exist_ok=True)
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.FileHandler(LOG_DIR / f"lab_{datetime.now().strftime('%Y%m%d')}.log", encoding='utf-8'),
            logging.StreamHandler()
        ]
    )
    _logging_ready = True


Value = Union[int, float, str, List[float]]

# Defaults double as the schema: a key is valid for a command iff it appears here.
COMMAND_SCHEMAS: Dict[str, Dict[str, Value]] = {
    "ladder": {"levels": 8, "tolerance": 1e-12},
    "boundary": {"b": [0.0, 0.1], "max_level": 6, "step": 0.01},
    "tower": {"b": 0.2, "N": 4, "grid": 32, "max_level": 7, "residual_degree": 4},
    "lyapunov": {"b": 0.1, "length": 100000, "transient": 2000, "max_level": 8},
    "pliss": {
        "trials": 10000, "N": 200, "alpha1": 0.0, "alpha2": 0.25, "alpha3": 0.75,
        "spread": 0.125, "max_exhaustive": 14, "epsilon": 0.015625,
    },
    "normalform": {"b": 0.1, "degree": 4, "rho": 0.05, "max_level": 8, "sample_length": 65536},
    "pinch": {"b": 0.1, "omega": 1.5, "sample": 10000, "rho": 0.05, "degree": 4, "max_level": 8},
    "order": {
        "b": 0.1, "depth": 8, "max_piece_depth": 6, "max_level": 8, "sample_length": 16384,
        "states": 10000, "trees": 40, "max_leaves": 200,
    },
    "unicrit": {"t": 0.05, "epsilon": 0.1, "N": 1000, "levels": 10, "sample_size": 4096},
    "denjoy": {"b": 0.1, "segments": 100, "seg_length": 1e-4, "max_iter": 30, "max_level": 8},
    "report": {"manifests": ""},
}

COMMON_KEYS = ("seed", "precision")
PRECISIONS = ("standard", "compensated")


def parse_value(raw: str) -> Value:
    text = raw.strip()
    if "," in text:
        try:
            return [float(part) for part in text.split(",") if part.strip()]
        except ValueError:
            return text
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_config_text(text: str) -> Dict[str, Value]:
    """Parse flat `key = value` lines; `#` starts a comment."""
    params: Dict[str, Value] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'", line=lineno)
        key, raw = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key", line=lineno)
        if key in params:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'", line=lineno, key=key)
        params[key] = parse_value(raw)
    return params


def _coerce(key: str, value: Value, default: Value) -> Value:
    if isinstance(default, list):
        if isinstance(value, (int, float)):
            return [float(value)]
        if isinstance(value, list):
            return value
    elif isinstance(default, bool):
        return value
    elif isinstance(default, int):
        if isinstance(value, int):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
    elif isinstance(default, float):
        if isinstance(value, (int, float)):
            return float(value)
    elif isinstance(default, str):
        if isinstance(value, list):
            return ",".join(str(v) for v in value)
        return str(value)
    raise ConfigError(f"invalid value for '{key}': {value!r}", key=key)


@dataclass(frozen=True)
class ExperimentConfig:
    """One validated experiment: command, parameters, precision, seed and output location."""

    command: str
    params: Dict[str, Value] = field(default_factory=dict)
    precision: str = "standard"
    seed: int = 0
    output_dir: Path = OUTPUT_DIR

    def get(self, key: str) -> Any:
        return self.params[key]

    def canonical(self) -> str:
        lines = [f"command={self.command}", f"precision={self.precision}", f"seed={self.seed}"]
        for key in sorted(self.params):
            value = self.params[key]
            if isinstance(value, list):
                value = ",".join(repr(float(v)) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key}={value}")
        return "\n".join(lines)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()


def build_config(command: str, params: Optional[Dict[str, Value]] = None,
                 seed: Optional[int] = None, precision: Optional[str] = None,
                 output_dir: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    """Validate parameters against the command schema and fill in defaults.

    Args:
        command: Command name, one of COMMAND_SCHEMAS
        params: Parsed key-value map (may contain `seed` and `precision`)
        seed: CLI override for the seed
        precision: CLI override for the precision mode
        output_dir: CLI override for the output directory

    Returns:
        ExperimentConfig with every schema key present

    Raises:
        ConfigError: Unknown command or key, or a value of the wrong type
    """
    if command not in COMMAND_SCHEMAS:
        raise ConfigError(f"unknown command '{command}'", command=command)
    schema = COMMAND_SCHEMAS[command]
    given = dict(params or {})

    file_seed = given.pop("seed", 0)
    file_precision = given.pop("precision", DEFAULT_PRECISION)
    unknown = sorted(set(given) - set(schema))
    if unknown:
        raise ConfigError(f"unknown keys for '{command}': {', '.join(unknown)}", keys=unknown)

    merged = {key: _coerce(key, given[key], default) if key in given else default
              for key, default in schema.items()}

    final_seed = seed if seed is not None else file_seed
    if not isinstance(final_seed, int):
        raise ConfigError(f"seed must be an integer, got {final_seed!r}")
    final_precision = str(precision if precision is not None else file_precision).lower()
    if final_precision not in PRECISIONS:
        raise ConfigError(f"precision must be one of {PRECISIONS}, got {final_precision!r}")

    out = Path(output_dir) if output_dir is not None else OUTPUT_DIR / command
    return ExperimentConfig(command=command, params=merged, precision=final_precision,
                            seed=final_seed, output_dir=out)


def load_config(path: Optional[Union[str, Path]], command: str, **overrides: Any) -> ExperimentConfig:
    """Read a flat config file (or none) and validate it for `command`."""
    params: Dict[str, Value] = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.exists():
            raise ConfigError(f"config file not found: {config_path}", path=str(config_path))
        params = parse_config_text(config_path.read_text(encoding="utf-8"))
        logger.info(f"✅ Config loaded: {config_path} ({len(params)} keys)")
    return build_config(command, params, **overrides)
