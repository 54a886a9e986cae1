"""Monte Carlo estimators and the verification experiments built on them.

Oracles come from :mod:`analytics`; samples come from :mod:`fbm` and
:mod:`transforms`. Acceptance bands are 5 standard errors unless stated.
"""
from __future__ import annotations

import logging
import math
from itertools import combinations
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from ..config import get_settings
from ..errors import BudgetError, DomainError, UsageError
from ..schemas import (
    CovEstimate,
    Ensemble,
    FitReport,
    MetricRow,
    ModelParams,
    QuadratureConfig,
    RangeClass,
    RangeDependenceReport,
    SamplePath,
    StationarityReport,
    TimeGrid,
    WeakConvergenceMode,
    WeakConvergenceReport,
    WeakConvergenceRow,
)
from . import analytics, transforms

logger = logging.getLogger(__name__)

Z_THRESHOLD = 3.0
SE_BAND = 5.0
MIN_SEQUENCE = 16
MIN_SCALES = 4


def empirical_cov(ensemble: Ensemble, s: float, t: float) -> CovEstimate:
    """Known-mean estimator ``(1/N) Σ X_s X_t``; paths are centered by construction."""
    if ensemble.count < 2:
        raise UsageError("at least 2 paths are needed for a standard error")
    products = ensemble.column(s) * ensemble.column(t)
    return CovEstimate(
        value=float(np.mean(products)),
        std_error=float(np.std(products, ddof=1) / math.sqrt(products.size)),
        count=int(products.size),
    )


def _paired_z(first: np.ndarray, second: np.ndarray) -> float:
    diff = first - second
    spread = float(np.std(diff, ddof=1))
    mean = float(np.mean(diff))
    if spread == 0.0:
        return 0.0 if mean == 0.0 else math.inf
    return mean / (spread / math.sqrt(diff.size))


def stationarity_test(ensemble: Ensemble, lag: float, shifts: Sequence[float]) -> StationarityReport:
    """Compares ``E(X_h X_{h+lag})`` across shifts with paired per-path z-scores."""
    if ensemble.count < 2:
        raise UsageError("at least 2 paths are needed for a stationarity test")
    products = [ensemble.column(h) * ensemble.column(h + lag) for h in shifts]
    estimates = [
        CovEstimate(
            value=float(np.mean(p)),
            std_error=float(np.std(p, ddof=1) / math.sqrt(p.size)),
            count=int(p.size),
        )
        for p in products
    ]
    max_z = max((abs(_paired_z(a, b)) for a, b in combinations(products, 2)), default=0.0)
    passed = max_z < Z_THRESHOLD
    logger.info("Stationarity test", extra={"lag": lag, "shifts": list(shifts), "max_abs_z": max_z, "passed": passed})
    return StationarityReport(lag=lag, shifts=list(shifts), estimates=estimates, max_abs_z=max_z, passed=passed)


def _fit(x: np.ndarray, y: np.ndarray) -> FitReport:
    if x.size < 3:
        bounds = (float(x[0]), float(x[-1])) if x.size else (0.0, 0.0)
        return FitReport(slope=0.0, intercept=0.0, r_squared=0.0, fit_range=bounds)
    result = stats.linregress(x, y)
    r_squared = float(result.rvalue) ** 2 if math.isfinite(result.rvalue) else 0.0
    return FitReport(
        slope=float(result.slope),
        intercept=float(result.intercept),
        r_squared=min(r_squared, 1.0),
        fit_range=(float(x[0]), float(x[-1])),
    )


def range_dependence_diagnostic(autocov: Sequence[float]) -> RangeDependenceReport:
    """Classifies an autocovariance sequence ``ρ(0), ρ(1), ...``.

    Fits ``log|ρ(n)|`` against ``log n`` (power law) and against ``n``
    (exponential) over the last three quarters of the lags. A dominant power
    law with exponent in ``(-1, 0)`` is long range; a dominant exponential, a
    summable power law or a vanishing tail is short range.
    """
    values = np.asarray(autocov, dtype=float)
    if values.ndim != 1 or values.size < MIN_SEQUENCE:
        raise UsageError(f"range dependence needs at least {MIN_SEQUENCE} lags")
    if not np.all(np.isfinite(values)):
        raise UsageError("autocovariance sequence must be finite")
    lags = np.arange(values.size, dtype=float)
    window = slice(values.size // 4, values.size)
    tail_sum = float(np.sum(values[values.size // 2 :]))
    scale = max(abs(values[0]), float(np.max(np.abs(values))))
    magnitude = np.abs(values[window])
    keep = magnitude > 1e-14 * scale
    n, logs = lags[window][keep], np.log(magnitude[keep])
    power = _fit(np.log(n), logs)
    exponential = _fit(n, logs)
    if keep.sum() < 3:
        classification, chosen = RangeClass.SHORT_RANGE, exponential
    elif power.r_squared >= exponential.r_squared:
        chosen = power
        if -1.0 < power.slope < 0.0:
            classification = RangeClass.LONG_RANGE
        elif power.slope <= -1.0:
            classification = RangeClass.SHORT_RANGE
        else:
            classification = RangeClass.INCONCLUSIVE
    elif exponential.slope < 0.0:
        classification, chosen = RangeClass.SHORT_RANGE, exponential
    else:
        classification, chosen = RangeClass.INCONCLUSIVE, exponential
    logger.info(
        "Range dependence",
        extra={"classification": classification.value, "power_slope": power.slope, "exp_slope": exponential.slope},
    )
    return RangeDependenceReport(
        classification=classification,
        fit=chosen,
        power_fit=power,
        exponential_fit=exponential,
        tail_partial_sum=tail_sum,
    )


def decay_rate_fit(taus: Sequence[float], values: Sequence[float], window: tuple[float, float]) -> FitReport:
    """Least-squares slope of ``log value`` against ``τ`` inside ``window``."""
    taus = np.asarray(taus, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = (taus >= window[0]) & (taus <= window[1])
    if mask.sum() < 2:
        raise UsageError(f"decay window {window} holds fewer than 2 points")
    if np.any(values[mask] <= 0):
        raise UsageError("decay fit needs positive values inside the window")
    return _fit(taus[mask], np.log(values[mask]))


def holder_exponent(path: SamplePath, scales: Sequence[int]) -> FitReport:
    """Slope of ``log max |X_{i+k} - X_i|`` against ``log(k dt)`` over window sizes ``k``."""
    if not path.grid.is_uniform():
        raise UsageError("Hölder estimate needs a uniform grid")
    if len(scales) < MIN_SCALES:
        raise UsageError(f"Hölder estimate needs at least {MIN_SCALES} scales")
    values = path.values
    dt = float(path.grid.times[1] - path.grid.times[0])
    sizes, maxima = [], []
    for k in sorted(set(int(k) for k in scales)):
        if not 0 < k < values.size:
            raise UsageError(f"window size {k} does not fit a path of {values.size} points")
        sizes.append(k * dt)
        maxima.append(float(np.max(np.abs(values[k:] - values[:-k]))))
    if min(maxima) <= 0:
        raise UsageError("path is constant at some scale")
    return _fit(np.log(sizes), np.log(maxima))


def _normality_checks(sample: np.ndarray, label: str) -> list[MetricRow]:
    n = sample.size
    skew = float(stats.skew(sample))
    excess = float(stats.kurtosis(sample))
    z_skew = skew / math.sqrt(6.0 / n)
    z_kurt = excess / math.sqrt(24.0 / n)
    return [
        MetricRow(metric=f"skewness[{label}]", estimate=skew, std_error=math.sqrt(6.0 / n), target=0.0, z=z_skew, passed=abs(z_skew) < SE_BAND),
        MetricRow(metric=f"excess_kurtosis[{label}]", estimate=excess, std_error=math.sqrt(24.0 / n), target=0.0, z=z_kurt, passed=abs(z_kurt) < SE_BAND),
    ]


def _quadrature_rows(
    params: ModelParams,
    a_values: Sequence[float],
    probes: Sequence[tuple[float, float]],
    kappa: float,
    quad: QuadratureConfig,
) -> tuple[list[WeakConvergenceRow], list[MetricRow]]:
    rows: list[WeakConvergenceRow] = []
    checks: list[MetricRow] = []
    for s, t in probes:
        s, t = min(s, t), max(s, t)
        target = kappa * s
        previous = math.inf
        decreasing = True
        for a in a_values:
            value = analytics.scaled_y_cov(params, a, s, t, quad).value
            error = abs(value - target)
            ok = error < previous
            decreasing &= ok
            previous = error
            rows.append(WeakConvergenceRow(s=s, t=t, a=a, value=value, target=target, error=error, passed=ok))
            if t > s:
                spread = analytics.y_var(params, a * (t - s), quad).value / a
                bound = kappa * (t - s)
                checks.append(
                    MetricRow(metric=f"tightness[a={a:g},{s:g}:{t:g}]", estimate=spread, target=bound, passed=spread <= bound)
                )
        checks.append(MetricRow(metric=f"error_decreasing[{s:g}:{t:g}]", estimate=previous, target=0.0, passed=decreasing))
    return rows, checks


def _monte_carlo_rows(
    params: ModelParams,
    a_values: Sequence[float],
    probes: Sequence[tuple[float, float]],
    kappa: float,
    quad: QuadratureConfig,
    *,
    paths: int,
    seed: int,
    base_step: float,
    refine: int,
) -> tuple[list[WeakConvergenceRow], list[MetricRow]]:
    settings = get_settings()
    t_max = max(max(s, t) for s, t in probes)
    rows: list[WeakConvergenceRow] = []
    checks: list[MetricRow] = []
    for a in a_values:
        steps = int(math.ceil(a * t_max / base_step - 1e-9))
        points = steps * refine + 1
        if points > settings.max_path_points:
            raise BudgetError(f"a={a:g} needs {points} path points, above the budget of {settings.max_path_points}")
        grid = TimeGrid.from_array(base_step * np.arange(steps + 1))
        ensemble = transforms.y_process(params, grid, seed, paths, refine=refine)
        for s, t in probes:
            s, t = min(s, t), max(s, t)
            estimate = empirical_cov(ensemble, a * s, a * t)
            value, std_error = estimate.value / a, estimate.std_error / a
            if params.hurst == 0.5:
                target = s
            else:
                target = analytics.scaled_y_cov(params, a, s, t, quad).value
            z = (value - target) / std_error
            rows.append(
                WeakConvergenceRow(
                    s=s, t=t, a=a, value=value, target=target, error=abs(value - kappa * s),
                    std_error=std_error, z=z, passed=abs(z) < SE_BAND,
                )
            )
        marginal = ensemble.column(a * t_max) / math.sqrt(a)
        checks.extend(_normality_checks(marginal, f"a={a:g},t={t_max:g}"))
    return rows, checks


def weak_convergence_experiment(
    params: ModelParams,
    a_values: Sequence[float],
    probe_pairs: Sequence[tuple[float, float]],
    mode: WeakConvergenceMode = WeakConvergenceMode.QUADRATURE,
    *,
    quad: Optional[QuadratureConfig] = None,
    paths: Optional[int] = None,
    seed: int = 0,
    base_step: float = 0.125,
    refine: Optional[int] = None,
) -> WeakConvergenceReport:
    """Covariance of ``a^{-1/2} Y_{a·}`` against its limit ``κ min(s, t)``.

    Functional convergence itself is not testable; the experiment checks
    finite-dimensional covariances, the tightness inequality (quadrature mode)
    and marginal normality (Monte Carlo mode).
    """
    a_values = [float(a) for a in a_values]
    if not a_values or any(b <= a for a, b in zip(a_values, a_values[1:])) or a_values[0] <= 0:
        raise UsageError("scale values must be positive and strictly increasing")
    if not probe_pairs:
        raise UsageError("at least one probe pair is needed")
    settings = get_settings()
    quad = quad or settings.quadrature()
    if mode == WeakConvergenceMode.QUADRATURE:
        kappa = analytics.kappa_sigma(params).kappa
        rows, checks = _quadrature_rows(params, a_values, probe_pairs, kappa, quad)
    else:
        if params.hurst < 0.5:
            raise DomainError("Monte Carlo weak convergence needs H >= 1/2")
        kappa = 1.0 if params.hurst == 0.5 else analytics.kappa_sigma(params).kappa
        rows, checks = _monte_carlo_rows(
            params,
            a_values,
            probe_pairs,
            kappa,
            quad,
            paths=paths or settings.paths,
            seed=seed,
            base_step=base_step,
            refine=refine or settings.refine,
        )
    passed = all(row.passed for row in rows) and all(check.passed for check in checks)
    logger.info("Weak convergence experiment", extra={"mode": mode.value, "rows": len(rows), "passed": passed})
    return WeakConvergenceReport(mode=mode, kappa=kappa, rows=rows, checks=checks, passed=passed)


def fit_rows(name: str, fit: FitReport, target: Optional[float] = None, rel_tol: Optional[float] = None) -> list[MetricRow]:
    passed = True
    if target is not None and rel_tol is not None:
        passed = abs(fit.slope - target) <= rel_tol * abs(target)
    return [
        MetricRow(metric=f"{name}.slope", estimate=fit.slope, target=target, passed=passed),
        MetricRow(metric=f"{name}.r_squared", estimate=fit.r_squared),
    ]


def stationarity_rows(report: StationarityReport) -> list[MetricRow]:
    rows = [
        MetricRow(metric=f"cov[h={h:g},lag={report.lag:g}]", estimate=e.value, std_error=e.std_error)
        for h, e in zip(report.shifts, report.estimates)
    ]
    rows.append(MetricRow(metric="max_abs_z", estimate=report.max_abs_z, target=Z_THRESHOLD, z=report.max_abs_z, passed=report.passed))
    return rows


def range_dependence_rows(report: RangeDependenceReport, expected=None) -> list[MetricRow]:
    passed = expected is None or report.classification == expected
    rows = [MetricRow(metric=f"classification={report.classification.value}", estimate=float(passed), target=1.0, passed=passed)]
    rows += fit_rows("power_fit", report.power_fit)
    rows += fit_rows("exponential_fit", report.exponential_fit)
    rows.append(MetricRow(metric="tail_partial_sum", estimate=report.tail_partial_sum))
    return rows
