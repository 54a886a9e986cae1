from __future__ import annotations

import argparse
import logging

from ..config import Settings
from ..schemas import ExperimentKind, MetricRow
from ..services import analytics
from ..utils.grids import parse_range
from .common import RunOutcome, RunOutput

logger = logging.getLogger(__name__)

KAPPA_REL_TOL = 1e-6
INTEGRABILITY_REL_TOL = 1e-5


def register(subparsers: argparse._SubParsersAction, parents: list[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        "kernel", parents=parents, help="kernel k(x), its constants and the kappa cross-check (1/2 < H < 1)"
    )
    parser.add_argument("--x-grid", default="0.05:10:0.05", help="start:stop:step, x > 0")
    parser.set_defaults(handler=handle)


def _relative_check(metric: str, estimate: float, error: float, target: float, rel_tol: float) -> MetricRow:
    deviation = abs(estimate - target) / abs(target)
    return MetricRow(metric=metric, estimate=estimate, std_error=error, target=target, passed=deviation <= rel_tol)


def constant_rows(settings: Settings) -> list[MetricRow]:
    params = settings.model_params()
    quad = settings.quadrature()
    spec = analytics.kernel_spec(params)
    kappa = analytics.kappa_sigma(params)
    by_quadrature = analytics.kappa_by_quadrature(params, quad)
    integrability = analytics.ud_integrability_constant(params)
    integrability_quad = analytics.ud_integrability_by_quadrature(params, quad)
    return [
        MetricRow(metric="c_const", estimate=spec.c_const),
        MetricRow(metric="kernel_decay_rate", estimate=spec.decay_rate),
        MetricRow(metric="kappa", estimate=kappa.kappa),
        MetricRow(metric="sigma", estimate=kappa.sigma),
        _relative_check("kappa_by_quadrature", by_quadrature.value, by_quadrature.error, kappa.kappa, KAPPA_REL_TOL),
        MetricRow(metric="rho_y_decay_rate", estimate=analytics.rho_y_decay_rate(params)),
        MetricRow(metric="rho_y_limit_constant", estimate=analytics.rho_y_limit_constant(params)),
        MetricRow(metric="xd_decay_rate", estimate=analytics.xd_decay_rate(params)),
        MetricRow(metric="ud_decay_rate", estimate=analytics.ud_decay_rate(params)),
        MetricRow(metric="ud_integrability_constant", estimate=integrability),
        _relative_check(
            "ud_integrability_by_quadrature",
            integrability_quad.value,
            integrability_quad.error,
            integrability,
            INTEGRABILITY_REL_TOL,
        ),
    ]


def handle(args: argparse.Namespace, settings: Settings) -> RunOutcome:
    params = settings.model_params()
    params.require_kernel_regime()
    rows = analytics.tabulate("kernel", params, parse_range(args.x_grid))
    constants = constant_rows(settings)

    output = RunOutput.open(settings, ExperimentKind.KERNEL, args.out)
    table = output.table("kernel.csv", ("x", "value", "error_estimate"), rows)
    output.metrics("constants.csv", constants)
    output.plot(table, "kernel.svg", x="x", y=["value"], logy=True, title=f"k(x), H={params.hurst:g}, alpha={params.alpha:g}")
    manifest = output.manifest(tau_grid=args.x_grid)
    kappa = next(row.estimate for row in constants if row.metric == "kappa")
    return output.finish(manifest, checks=constants, lines=[f"kappa = {kappa:.17g}"])
