"""Verification experiments: each writes its data, a metric table and a plot."""
from __future__ import annotations

import argparse
import logging
from typing import Optional

import numpy as np

from ..config import Settings
from ..errors import UsageError
from ..schemas import ExperimentKind, Fou1Init, MetricRow, ModelParams, RangeClass, TimeGrid, WeakConvergenceMode
from ..services import analytics, estimation, fbm
from ..utils.grids import parse_float_list, parse_pairs, parse_range
from .common import RunOutcome, RunOutput, common_parser
from .simulate import sample

logger = logging.getLogger(__name__)

FINAL_ERROR_REL_TOL = 0.05
DECAY_REL_TOL = {"xd": 0.05, "ud": 0.10, "rho-y": 0.10}
HOLDER_BAND = (0.15, 0.10)

_MODES = {
    "quadrature": WeakConvergenceMode.QUADRATURE,
    "montecarlo": WeakConvergenceMode.MONTE_CARLO,
    "monte-carlo": WeakConvergenceMode.MONTE_CARLO,
}


def register(subparsers: argparse._SubParsersAction, parents: list[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser("experiment", parents=parents, help="run a verification experiment")
    experiments = parser.add_subparsers(dest="experiment", required=True, metavar="EXPERIMENT")
    nested = [common_parser(nested=True)]

    weak = experiments.add_parser("weak-convergence", parents=nested, help="a^{-1/2} Y_{a.} against sqrt(kappa) W")
    weak.add_argument("--a", default="4,16,64,256", help="increasing time scales")
    weak.add_argument("--probes", default="1:2,0.5:3", help="s:t pairs")
    weak.add_argument("--mode", type=str.lower, choices=sorted(_MODES), default="quadrature")
    weak.add_argument("--base-step", type=float, default=0.125, help="Monte Carlo grid step before scaling")
    weak.set_defaults(handler=weak_convergence)

    decay = experiments.add_parser("decay-rate", parents=nested, help="log-slope of an analytic covariance")
    decay.add_argument("--curve", choices=sorted(DECAY_REL_TOL), default="xd")
    decay.add_argument("--tau-grid", default="5:15:0.5")
    decay.add_argument("--window", default="5:15", help="lo:hi fit window")
    decay.set_defaults(handler=decay_rate)

    stationarity = experiments.add_parser("stationarity", parents=nested, help="shift invariance of E(X_h X_{h+lag})")
    stationarity.add_argument("--process", choices=("xd", "ou", "fou1", "fou2"), default="xd")
    stationarity.add_argument("--init", choices=[i.value for i in Fou1Init], default=Fou1Init.STATIONARY.value)
    stationarity.add_argument("--lag", type=float, default=1.0)
    stationarity.add_argument("--shifts", default="0,1,2")
    stationarity.set_defaults(handler=stationarity_check)

    ranged = experiments.add_parser("range-dependence", parents=nested, help="short or long range dependence")
    ranged.add_argument("--sequence", choices=("fgn", "rho-y", "fou1", "xd"), default="fgn")
    ranged.add_argument("--length", type=int, default=64, help="number of lags, starting at 0")
    ranged.add_argument("--expect", choices=[RangeClass.SHORT_RANGE.value, RangeClass.LONG_RANGE.value], default=None)
    ranged.set_defaults(handler=range_dependence)

    holder = experiments.add_parser("holder", parents=nested, help="Hoelder exponent of one sampled path")
    holder.add_argument("--process", choices=("fbm", "xd", "y", "fou1", "fou2"), default="fbm")
    holder.add_argument("--scales", default="1,2,4,8,16,32,64")
    holder.set_defaults(handler=holder_check)


def _window(text: str) -> tuple[float, float]:
    pairs = parse_pairs(text)
    if len(pairs) != 1 or pairs[0][0] >= pairs[0][1]:
        raise UsageError(f"expected one lo:hi window with lo < hi, got {text!r}")
    return pairs[0]


def weak_convergence(args: argparse.Namespace, settings: Settings) -> RunOutcome:
    params = settings.model_params()
    mode = _MODES[args.mode]
    if mode == WeakConvergenceMode.QUADRATURE:
        params.require_kernel_regime()
    a_values = parse_float_list(args.a)
    probes = parse_pairs(args.probes)
    report = estimation.weak_convergence_experiment(
        params,
        a_values,
        probes,
        mode,
        quad=settings.quadrature(),
        paths=settings.paths,
        seed=settings.seed,
        base_step=args.base_step,
        refine=settings.refine,
    )
    checks = list(report.checks)
    if mode == WeakConvergenceMode.QUADRATURE:
        for s, t in probes:
            s, t = min(s, t), max(s, t)
            last = [row for row in report.rows if (row.s, row.t) == (s, t)][-1]
            relative = last.error / abs(last.target) if last.target else last.error
            checks.append(
                MetricRow(
                    metric=f"final_relative_error[{s:g}:{t:g}]",
                    estimate=relative,
                    target=FINAL_ERROR_REL_TOL,
                    passed=relative < FINAL_ERROR_REL_TOL,
                )
            )
    checks.extend(
        MetricRow(
            metric=f"z[a={row.a:g},{row.s:g}:{row.t:g}]",
            estimate=row.value,
            std_error=row.std_error,
            target=row.target,
            z=row.z,
            passed=row.passed,
        )
        for row in report.rows
        if row.z is not None
    )

    output = RunOutput.open(settings, ExperimentKind.WEAK_CONVERGENCE, args.out)
    table = output.table(
        "weak_convergence.csv",
        ("s", "t", "a", "value", "target", "error", "std_error", "z"),
        ((r.s, r.t, r.a, r.value, r.target, r.error, r.std_error, r.z) for r in report.rows),
    )
    output.metrics("checks.csv", checks)
    output.plot(table, "weak_convergence.svg", x="a", y=["error"], logx=True, logy=True, style="markers", title="|cov - kappa min(s,t)|")
    manifest = output.manifest(
        paths=settings.paths if mode == WeakConvergenceMode.MONTE_CARLO else 0,
        extra={"mode": mode.value, "a": args.a, "probes": args.probes, "base_step": repr(args.base_step)},
    )
    passed = report.passed and all(check.passed for check in checks)
    return output.finish(manifest, checks=checks, passed=passed, lines=[f"kappa = {report.kappa:.17g}"])


def _decay_curve(curve: str, params: ModelParams, taus: np.ndarray, settings: Settings) -> tuple[list[float], list[float], float]:
    quad, trunc = settings.quadrature(), settings.truncation()
    if curve == "xd":
        values = np.asarray(analytics.xd_cov(params, 0.0, taus), dtype=float)
        return list(values), [0.0] * taus.size, analytics.xd_decay_rate(params)
    if curve == "ud":
        results = [analytics.ud_cov(params, 0.0, float(tau), trunc, quad) for tau in taus]
        return [r.value for r in results], [r.error for r in results], analytics.ud_decay_rate(params)
    results = [analytics.rho_y(params, int(tau), quad) for tau in taus]
    return [r.value for r in results], [r.error for r in results], analytics.rho_y_decay_rate(params)


def decay_rate(args: argparse.Namespace, settings: Settings) -> RunOutcome:
    params = settings.model_params()
    window = _window(args.window)
    taus = parse_range(args.tau_grid)
    if args.curve == "rho-y":
        taus = np.unique(np.round(taus))
    values, errors, rate = _decay_curve(args.curve, params, taus, settings)
    fit = estimation.decay_rate_fit(taus, values, window)
    checks = estimation.fit_rows("log_decay", fit, target=-rate, rel_tol=DECAY_REL_TOL[args.curve])

    output = RunOutput.open(settings, ExperimentKind.DECAY_RATE, args.out)
    table = output.table("curve.csv", ("x", "value", "error_estimate"), zip(taus, values, errors))
    output.metrics("fit.csv", checks)
    output.plot(table, "curve.svg", x="x", y=["value"], logy=True, title=f"{args.curve} decay")
    manifest = output.manifest(tau_grid=args.tau_grid, extra={"curve": args.curve, "window": args.window})
    return output.finish(manifest, checks=checks, lines=[f"slope {fit.slope:.6g}, expected {-rate:.6g}"])


def stationarity_check(args: argparse.Namespace, settings: Settings) -> RunOutcome:
    params = settings.model_params()
    shifts = parse_float_list(args.shifts)
    grid = TimeGrid.uniform(settings.t_max, settings.steps)
    ensemble = sample(args.process, params, grid, settings, method="LangevinOnY", init=args.init)
    report = estimation.stationarity_test(ensemble, args.lag, shifts)
    checks = estimation.stationarity_rows(report)

    output = RunOutput.open(settings, ExperimentKind.STATIONARITY, args.out)
    table = output.table(
        "stationarity.csv",
        ("shift", "value", "std_error"),
        ((h, e.value, e.std_error) for h, e in zip(report.shifts, report.estimates)),
    )
    output.metrics("checks.csv", checks)
    output.plot(table, "stationarity.svg", x="shift", y=["value"], style="markers", title=f"{args.process}, lag {args.lag:g}")
    extra = {"process": args.process, "lag": repr(args.lag), "shifts": args.shifts, **ensemble.meta}
    manifest = output.manifest(paths=ensemble.count, t_max=settings.t_max, steps=settings.steps, extra=extra)
    return output.finish(manifest, checks=checks, passed=report.passed, lines=[f"max |z| = {report.max_abs_z:.3g}"])


def _expected_class(sequence: str, params: ModelParams) -> RangeClass:
    if sequence in ("fgn", "fou1") and params.hurst > 0.5:
        return RangeClass.LONG_RANGE
    return RangeClass.SHORT_RANGE


def _sequence(sequence: str, params: ModelParams, length: int, settings: Settings) -> list[float]:
    lags = np.arange(length)
    if sequence == "fgn":
        return list(np.asarray(fbm.fgn_autocov(params, lags), dtype=float))
    if sequence == "xd":
        return list(np.asarray(analytics.xd_cov(params, 0.0, lags.astype(float)), dtype=float))
    quad = settings.quadrature()
    if sequence == "rho-y":
        return [analytics.rho_y(params, int(n), quad).value for n in lags]
    return [analytics.fou1_stationary_cov(params, float(n), quad).value for n in lags]


def range_dependence(args: argparse.Namespace, settings: Settings) -> RunOutcome:
    params = settings.model_params()
    values = _sequence(args.sequence, params, args.length, settings)
    report = estimation.range_dependence_diagnostic(values)
    expected: Optional[RangeClass] = RangeClass(args.expect) if args.expect else _expected_class(args.sequence, params)
    checks = estimation.range_dependence_rows(report, expected)

    output = RunOutput.open(settings, ExperimentKind.RANGE_DEPENDENCE, args.out)
    table = output.table("sequence.csv", ("x", "value"), enumerate(values))
    output.metrics("diagnostic.csv", checks)
    output.plot(table, "sequence.svg", x="x", y=["value"], logx=True, logy=True, style="markers", title=args.sequence)
    manifest = output.manifest(extra={"sequence": args.sequence, "length": str(args.length), "expect": expected.value})
    lines = [f"{args.sequence}: {report.classification.value} (expected {expected.value})"]
    return output.finish(manifest, checks=checks, lines=lines)


def holder_check(args: argparse.Namespace, settings: Settings) -> RunOutcome:
    params = settings.model_params()
    scales = [int(k) for k in parse_float_list(args.scales)]
    grid = TimeGrid.uniform(settings.t_max, settings.steps)
    ensemble = sample(args.process, params, grid, settings.model_copy(update={"paths": 1}), method="LangevinOnY", init="Zero")
    fit = estimation.holder_exponent(ensemble.path(0), scales)
    below, above = HOLDER_BAND
    h = params.hurst
    checks = [
        MetricRow(metric="holder.slope", estimate=fit.slope, target=h, passed=h - below <= fit.slope <= h + above),
        MetricRow(metric="holder.r_squared", estimate=fit.r_squared),
    ]

    values = ensemble.values[0]
    dt = grid.times[1] - grid.times[0]
    increments = [(k * dt, float(np.max(np.abs(values[k:] - values[:-k])))) for k in sorted(set(scales))]

    output = RunOutput.open(settings, ExperimentKind.HOLDER, args.out)
    output.table("path.csv", ("t", "value"), zip(grid.array, values))
    table = output.table("increments.csv", ("window", "max_increment"), increments)
    output.metrics("fit.csv", checks)
    output.plot(table, "holder.svg", x="window", y=["max_increment"], logx=True, logy=True, style="markers", title=args.process)
    extra = {"process": args.process, "scales": args.scales, **ensemble.meta}
    manifest = output.manifest(paths=1, t_max=settings.t_max, steps=settings.steps, extra=extra)
    return output.finish(manifest, checks=checks, lines=[f"Hoelder slope {fit.slope:.4g} for H={h:g}"])
