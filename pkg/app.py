# -*- coding: utf-8 -*-
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from src.errors import LabError
from src.experiments import COMMANDS, run
from src.settings import LAB_VERSION, configure_logging, load_config

logger = logging.getLogger(__name__)

ERROR_FILE = "error.json"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lab",
        description="Renormalization lab for dissipative Hénon-like maps",
    )
    parser.add_argument("--version", action="version", version=f"lab {LAB_VERSION}")
    parser.add_argument("command", choices=sorted(COMMANDS), help="pipeline to run")
    parser.add_argument("--config", type=Path, default=None, help="flat key = value experiment file")
    parser.add_argument("--out", type=Path, default=None, help="output directory (default runs/<command>)")
    parser.add_argument("--seed", type=int, default=None, help="overrides the seed of the config file")
    parser.add_argument("--precision", choices=("standard", "compensated"), default=None)
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING...")
    return parser


def _write_error(error: LabError, out_dir: Optional[Path]) -> None:
    payload = error.to_payload()
    text = json.dumps(payload, indent=2, ensure_ascii=False)
    print(text)
    if out_dir is None:
        return
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / ERROR_FILE).write_text(text, encoding='utf-8')
    except OSError as e:
        logger.error(f"❌ Could not write {ERROR_FILE}: {e}")


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; 0 iff every check passed, the error's exit code on a LabError."""
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    out_dir = args.out
    try:
        config = load_config(args.config, args.command, seed=args.seed, precision=args.precision,
                             output_dir=args.out)
        out_dir = config.output_dir
        manifest = run(config)
    except LabError as e:
        logger.error(f"❌ [{args.command.upper()}] {e.code}: {e.message}")
        _write_error(e, out_dir)
        return e.exit_code

    failed = [c for c in manifest.checks if not c["passed"]]
    if failed:
        for c in failed:
            logger.warning(f"⚠️ [AC{c['id']}] failed: {c['name']}")
        return 1
    logger.info(f"✅ [{args.command.upper()}] all {len(manifest.checks)} checks passed -> {out_dir}")
    return 0


if __name__ == '__main__':
    sys.exit(main())
