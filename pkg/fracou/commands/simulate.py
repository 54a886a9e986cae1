from __future__ import annotations

import argparse
import logging

from ..config import Settings
from ..schemas import Ensemble, ExperimentKind, Fou1Init, Fou2Method, ModelParams, TimeGrid
from ..services import fbm, transforms
from ..services.storage import ensemble_rows
from ..utils.grids import parse_range
from .common import RunOutcome, RunOutput

logger = logging.getLogger(__name__)

PROCESSES = ("fbm", "xd", "y", "fou1", "fou2", "ou")


def register(subparsers: argparse._SubParsersAction, parents: list[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser("simulate", parents=parents, help="sample a seeded ensemble of paths")
    parser.add_argument("--process", choices=PROCESSES, required=True)
    parser.add_argument("--method", choices=[m.value for m in Fou2Method], default=Fou2Method.LANGEVIN_ON_Y.value)
    parser.add_argument("--init", choices=[i.value for i in Fou1Init], default=Fou1Init.ZERO.value)
    parser.add_argument("--grid", default=None, help="start:stop:step, replaces --t-max/--steps")
    parser.add_argument("--preview", type=int, default=5, help="paths drawn in the SVG")
    parser.set_defaults(handler=handle)


def sample(process: str, params: ModelParams, grid: TimeGrid, settings: Settings, *, method: str, init: str) -> Ensemble:
    seed, count = settings.seed, settings.paths
    if process == "fbm":
        return fbm.sample_fbm(params, grid, seed, count, settings.sampler)
    if process == "xd":
        return transforms.doob_transform(params, grid, seed, count)
    if process == "ou":
        return transforms.ou_path(params, grid, seed, count)
    if process == "y":
        return transforms.y_process(params, grid, seed, count)
    if process == "fou1":
        return transforms.fou1_path(params, grid, seed, count, Fou1Init(init), settings.truncation())
    return transforms.fou2_path(params, grid, seed, count, Fou2Method(method), settings.truncation())


def handle(args: argparse.Namespace, settings: Settings) -> RunOutcome:
    params = settings.model_params()
    if args.grid:
        grid = TimeGrid.from_array(parse_range(args.grid))
    else:
        grid = TimeGrid.uniform(settings.t_max, settings.steps)
    ensemble = sample(args.process, params, grid, settings, method=args.method, init=args.init)

    output = RunOutput.open(settings, ExperimentKind.SIMULATE, args.out)
    output.table("ensemble.csv", ("path_id", "t", "value"), ensemble_rows(ensemble))
    shown = max(0, min(args.preview, ensemble.count))
    names = [f"path_{i}" for i in range(shown)]
    preview = output.table("preview.csv", ("t", *names), zip(grid.array, *ensemble.values[:shown]))
    output.plot(preview, "paths.svg", x="t", y=names, title=f"{ensemble.process_tag.value}, H={params.hurst:g}")

    extra = {"process": args.process, **ensemble.meta}
    if args.process == "fou2":
        extra["fou2_method"] = args.method
    if args.process == "fou1":
        extra["fou1_init"] = args.init
    if args.grid:
        extra["grid"] = args.grid
    manifest = output.manifest(
        paths=ensemble.count,
        t_max=None if args.grid else settings.t_max,
        steps=None if args.grid else settings.steps,
        extra=extra,
    )
    logger.info("Simulated ensemble", extra={"process_name": args.process, "count": ensemble.count, "points": grid.size})
    return output.finish(manifest, lines=[f"{ensemble.count} {ensemble.process_tag.value} paths on {grid.size} points"])
