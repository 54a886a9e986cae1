from __future__ import annotations

import argparse
import logging
import sys
from logging.config import dictConfig
from typing import Optional, Sequence

from pydantic import ValidationError

from . import __version__
from .commands import cov, experiment, kernel, render, runs, simulate
from .commands.common import common_parser, setting_overrides
from .config import load_settings, use_settings
from .errors import CheckFailedError, FouError

logger = logging.getLogger(__name__)

COMMANDS = (simulate, cov, kernel, experiment, render, runs)
KERNEL_HANDLERS = (kernel.handle, experiment.weak_convergence)


def configure_logging(level: str = "INFO") -> None:
    logging_config = {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "default": {
                "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
            }
        },
        "handlers": {
            "default": {
                "class": "logging.StreamHandler",
                "formatter": "default",
            }
        },
        "root": {
            "handlers": ["default"],
            "level": level.upper(),
        },
    }
    dictConfig(logging_config)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracou",
        description="Simulation and verification of fractional Ornstein-Uhlenbeck processes.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    parents = [common_parser()]
    for command in COMMANDS:
        command.register(subparsers, parents)
    return parser


def _describe(exc: ValidationError) -> str:
    parts = []
    for error in exc.errors():
        location = ".".join(str(part) for part in error["loc"]) or exc.title
        parts.append(f"{location}: {error['msg']}")
    return "; ".join(parts)


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        settings = load_settings(getattr(args, "config", None), setting_overrides(args))
        configure_logging(settings.log_level)
        settings.model_params()
        settings.quadrature()
        settings.truncation()
        with use_settings(settings):
            outcome = args.handler(args, settings)
    except ValidationError as exc:
        detail = _describe(exc)
        if getattr(args, "handler", None) in KERNEL_HANDLERS:
            detail += " (the kernel representation requires 1/2 < H < 1)"
        print(f"fracou: invalid parameters: {detail}", file=sys.stderr)
        return 2
    except FouError as exc:
        logger.error("Run failed", extra={"error": type(exc).__name__, "exit_code": exc.exit_code})
        print(f"fracou: {exc.detail}", file=sys.stderr)
        return exc.exit_code

    for line in outcome.lines:
        print(line)
    if getattr(args, "strict", False) and outcome.passed is False:
        print(f"fracou: failed checks: {', '.join(outcome.failures) or 'see tables'}", file=sys.stderr)
        return CheckFailedError.exit_code
    return 0
