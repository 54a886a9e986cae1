from __future__ import annotations

import argparse
import logging

from ..config import Settings
from ..schemas import ExperimentKind
from ..services import analytics
from ..utils.grids import parse_range
from .common import RunOutcome, RunOutput

logger = logging.getLogger(__name__)

TABLE_HEADER = ("x", "value", "error_estimate")


def register(subparsers: argparse._SubParsersAction, parents: list[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser("cov", parents=parents, help="tabulate an analytic covariance or kernel")
    parser.add_argument("--formula", choices=analytics.TABULATED, required=True)
    parser.add_argument("--tau-grid", default="0:10:0.1", help="start:stop:step of lags (or times)")
    parser.add_argument("--s", type=float, default=0.0, help="first time of two-time covariances")
    parser.add_argument("--terms", type=int, default=1, help="partial-sum terms for fou1-asym")
    parser.add_argument("--scale", type=float, default=1.0, help="time scale a for scaled-y")
    parser.add_argument("--logy", action="store_true")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace, settings: Settings) -> RunOutcome:
    params = settings.model_params()
    xs = parse_range(args.tau_grid)
    rows = analytics.tabulate(
        args.formula,
        params,
        xs,
        s=args.s,
        terms=args.terms,
        scale=args.scale,
        quad=settings.quadrature(),
        trunc=settings.truncation(),
    )

    output = RunOutput.open(settings, ExperimentKind.COV, args.out)
    table = output.table("cov.csv", TABLE_HEADER, rows)
    output.plot(table, "cov.svg", x="x", y=["value"], logy=args.logy, title=args.formula)
    extra = {"formula": args.formula, "s": repr(args.s)}
    if args.formula == "fou1-asym":
        extra["terms"] = str(args.terms)
    if args.formula == "scaled-y":
        extra["scale"] = repr(args.scale)
    manifest = output.manifest(tau_grid=args.tau_grid, extra=extra)
    worst = max((row.error_estimate for row in rows), default=0.0)
    return output.finish(manifest, lines=[f"{args.formula}: {len(rows)} rows, largest error estimate {worst:.3g}"])
