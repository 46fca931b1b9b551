# cli.py
import argparse
import importlib
import os
import sys
from types import ModuleType
from typing import Optional, Sequence

import config
from backends.base import BackendError
from helpers.logging_helper import get_logger, setup_logging
from utility.logging_utils import LogSettings

HERE = os.path.dirname(os.path.abspath(__file__))
COMMANDS_DIR = os.path.join(HERE, "commands")

log = get_logger("cli")

# ValueError covers config, dataset, metric, ensemble, scorer and prompt errors
KNOWN_ERRORS = (ValueError, OSError, KeyError, BackendError)


def discover_commands() -> list[ModuleType]:
    """Import every commands/<name>.py that exposes register() and run()."""
    found = []
    for filename in sorted(os.listdir(COMMANDS_DIR)):
        if not filename.endswith(".py") or filename.startswith("_"):
            continue
        name = f"commands.{filename[:-3]}"
        try:
            module = importlib.import_module(name)
        except ImportError:
            log.exception("Failed to load command %s", filename)
            continue
        if not callable(getattr(module, "register", None)) or not callable(
            getattr(module, "run", None)
        ):
            log.warning("Skipping %s: no register()/run()", filename)
            continue
        found.append(module)
    return found


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ue", description="Uncertainty estimation studies for LLM answers."
    )
    parser.add_argument("--config", help="JSON run-config (default: built-in defaults)")
    parser.add_argument("--log-level", help="override LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in discover_commands():
        module.register(subparsers)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        setup_logging(LogSettings.from_env(level=args.log_level))
        cfg = config.load_run_config(args.config)
        return int(args.run(args, cfg) or 0)
    except KNOWN_ERRORS as e:
        log.error("%s failed: %s", args.command, e)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
