from __future__ import annotations

import argparse
import logging
from pathlib import Path

from ..config import Settings
from ..errors import UsageError
from ..services.plotting import render_svg
from .common import RunOutcome

logger = logging.getLogger(__name__)


def register(subparsers: argparse._SubParsersAction, parents: list[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser("render", help="render a CSV table as a static SVG plot")
    parser.add_argument("--table", type=Path, required=True)
    parser.add_argument("--x", required=True, help="column for the horizontal axis")
    parser.add_argument("--y", required=True, help="comma separated columns to draw")
    parser.add_argument("--out", type=Path, required=True, help="target .svg file")
    parser.add_argument("--logx", action="store_true")
    parser.add_argument("--logy", action="store_true")
    parser.add_argument("--style", choices=("line", "markers"), default="line")
    parser.add_argument("--title", default=None)
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace, settings: Settings) -> RunOutcome:
    columns = [name.strip() for name in args.y.split(",") if name.strip()]
    if not columns:
        raise UsageError("--y needs at least one column")
    path = render_svg(
        args.table,
        args.out,
        x=args.x,
        y=columns,
        logx=args.logx,
        logy=args.logy,
        style=args.style,
        title=args.title,
    )
    return RunOutcome(record=None, passed=None, lines=[f"wrote {path}"])
