# -*- coding: utf-8 -*-
"""Run outputs: manifests, CSV/JSON artifacts, the result cache and the summary report."""

import csv
import fcntl
import json
import logging
import math
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Union

import numpy as np
from jinja2 import Template

from src.settings import CACHE_DIR, LAB_VERSION, ExperimentConfig

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
ACCEPTANCE_IDS = tuple(range(1, 13))
UNITS_NOTE = "# logs are natural logs; lengths in map coordinates"
REPORT_TEMPLATE = Path(__file__).resolve().parent.parent / "templates" / "report.md.j2"


def encode_value(value: Any) -> Any:
    """JSON-safe copy: ±inf and nan become strings, numpy scalars and arrays become Python values."""
    if isinstance(value, dict):
        return {str(k): encode_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode_value(v) for v in value]
    if isinstance(value, np.ndarray):
        return encode_value(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(value, Path):
        return str(value)
    return value


def decode_value(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: decode_value(v) for k, v in value.items()}
    if isinstance(value, list):
        return [decode_value(v) for v in value]
    if value in ("inf", "-inf", "nan"):
        return float(value)
    return value


def _cell(value: Any) -> Any:
    value = encode_value(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bool):
        return int(value)
    return value


@dataclass
class Check:
    """One pass/fail assertion of a run, tied to an acceptance criterion."""

    acceptance_id: int
    name: str
    passed: bool
    value: Any = None
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return encode_value({"id": self.acceptance_id, "name": self.name, "passed": self.passed,
                             "value": self.value, "detail": self.detail})


@dataclass
class RunManifest:
    command: str
    config_hash: str
    version: str
    seed: int
    precision: str
    params: Dict[str, Any]
    wall_time: float = 0.0
    outputs: List[str] = field(default_factory=list)
    metrics: Dict[str, Any] = field(default_factory=dict)
    checks: List[Dict[str, Any]] = field(default_factory=list)
    started: Optional[str] = None

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_dict(self) -> Dict[str, Any]:
        return encode_value({
            "command": self.command, "config_hash": self.config_hash, "version": self.version,
            "seed": self.seed, "precision": self.precision, "params": self.params,
            "wall_time": self.wall_time, "outputs": self.outputs, "metrics": self.metrics,
            "checks": self.checks, "passed": self.passed, "started": self.started,
        })

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunManifest":
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
        data.pop("passed", None)
        return cls(**decode_value(data))


class RunManager:
    """Writes the artifacts of one run into its output directory."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.out_dir = Path(config.output_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.outputs: List[str] = []
        self.checks: List[Check] = []
        self._start = time.perf_counter()
        self._started = datetime.now().isoformat()

    def write_csv(self, name: str, columns: Sequence[str], rows: Iterable[Dict[str, Any]],
                  note: str = UNITS_NOTE) -> Path:
        """CSV with a units note and a header row; ±inf written as strings."""
        path = self.out_dir / name
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(note + "\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(row.get(col)) for col in columns])
        self._record(name)
        return path

    def write_json(self, name: str, data: Any) -> Path:
        path = self.out_dir / name
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(encode_value(data), f, indent=2, ensure_ascii=False)
        self._record(name)
        return path

    def write_text(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        path.write_text(text, encoding='utf-8')
        self._record(name)
        return path

    def _record(self, name: str) -> None:
        if name not in self.outputs:
            self.outputs.append(name)

    def check(self, acceptance_id: int, name: str, passed: bool, value: Any = None, detail: str = "") -> bool:
        self.checks.append(Check(acceptance_id, name, bool(passed), value, detail))
        status = "✅" if passed else "❌"
        logger.info(f"{status} [AC{acceptance_id}] {name}: {encode_value(value)}")
        return bool(passed)

    def finalize(self, metrics: Dict[str, Any]) -> RunManifest:
        manifest = RunManifest(
            command=self.config.command, config_hash=self.config.config_hash(), version=LAB_VERSION,
            seed=self.config.seed, precision=self.config.precision, params=dict(self.config.params),
            wall_time=round(time.perf_counter() - self._start, 3), outputs=list(self.outputs),
            metrics=metrics, checks=[c.to_dict() for c in self.checks], started=self._started,
        )
        self.outputs.append(MANIFEST_NAME)
        manifest.outputs = list(self.outputs)
        with open(self.out_dir / MANIFEST_NAME, 'w', encoding='utf-8') as f:
            json.dump(manifest.to_dict(), f, indent=2, ensure_ascii=False)
        logger.info(f"📊 Run '{manifest.command}' finished in {manifest.wall_time}s: "
                    f"{sum(c['passed'] for c in manifest.checks)}/{len(manifest.checks)} checks passed")
        return manifest


class ResultCache:
    """`<root>/<command>/<config-hash>.json`, single writer under an advisory lock."""

    def __init__(self, command: str, root: Optional[Union[str, Path]] = None):
        self.dir = Path(root if root is not None else CACHE_DIR) / command
        self.dir.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.dir / f"{key}.json"

    @contextmanager
    def _locked(self) -> Iterator[None]:
        with open(self.dir / ".lock", 'w') as lock:
            fcntl.flock(lock, fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(lock, fcntl.LOCK_UN)

    def get(self, key: str) -> Optional[Dict[str, Any]]:
        path = self._path(key)
        if not path.exists():
            return None
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = decode_value(json.load(f))
            logger.info(f"✅ Cache hit: {path}")
            return data
        except (json.JSONDecodeError, OSError) as e:
            logger.warning(f"⚠️ Corrupt cache entry {path} ignored: {e}")
            return None

    def put(self, key: str, data: Dict[str, Any]) -> Path:
        path = self._path(key)
        tmp = path.with_suffix(".tmp")
        with self._locked():
            with open(tmp, 'w', encoding='utf-8') as f:
                json.dump(encode_value(data), f, indent=2, ensure_ascii=False)
            tmp.replace(path)
        return path


# -- summary report ---------------------------------------------------------------------

def build_summary(manifests: Sequence[RunManifest]) -> Dict[str, Any]:
    """Aggregate checks by acceptance criterion; a criterion passes iff all its checks pass."""
    criteria: Dict[int, Dict[str, Any]] = {}
    for manifest in manifests:
        for check in manifest.checks:
            entry = criteria.setdefault(int(check["id"]), {"id": int(check["id"]), "passed": True,
                                                           "commands": [], "checks": []})
            entry["passed"] = entry["passed"] and bool(check["passed"])
            if manifest.command not in entry["commands"]:
                entry["commands"].append(manifest.command)
            entry["checks"].append({"command": manifest.command, **check})
    ordered = [criteria[k] for k in sorted(criteria)]
    return {
        "version": LAB_VERSION,
        "runs": [{"command": m.command, "config_hash": m.config_hash, "wall_time": m.wall_time,
                  "passed": m.passed, "metrics": m.metrics} for m in manifests],
        "criteria": ordered,
        "criteria_evaluated": len(ordered),
        "criteria_passed": sum(1 for c in ordered if c["passed"]),
        "missing_criteria": [i for i in ACCEPTANCE_IDS if i not in criteria],
    }


class ReportComposer:
    """Renders the human-readable summary table from a template file."""

    def __init__(self, template_path: Union[str, Path] = REPORT_TEMPLATE):
        self.template_path = Path(template_path)
        self.template = self.load_template()

    def load_template(self) -> Optional[Template]:
        try:
            with open(self.template_path, 'r', encoding='utf-8') as f:
                template_content = f.read()
                logger.info(f"✅ Template loaded: {self.template_path}")
                return Template(template_content)
        except FileNotFoundError:
            logger.error(f"❌ Template not found: {self.template_path}")
            return None

    def compose(self, summary: Dict[str, Any]) -> str:
        if not self.template:
            logger.error("❌ Template unavailable, writing the JSON summary only")
            return ""
        return self.template.render(summary=encode_value(summary), generated=datetime.now().isoformat())
