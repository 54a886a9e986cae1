"""Processes derived from FBM: Doob transform, the driver Y, Langevin solutions of both kinds.

Stieltjes integrals against Z or Y are never summed over rough increments;
every one is rewritten by partial integration into Riemann integrals of the
path against smooth weights and evaluated with the trapezoid rule on a
refinement of the user grid.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate

from ..config import get_settings
from ..errors import BudgetError, DomainError, UsageError
from ..schemas import Ensemble, Fou1Init, Fou2Method, ModelParams, ProcessTag, SamplePath, TimeGrid, TruncationPolicy
from ..utils.grids import refine_times
from ..utils.quadrature import resolve_lower_cutoff
from ..utils.rng import map_chunks
from . import analytics
from .fbm import (
    CholeskySampler,
    GaussianSampler,
    SamplerMethod,
    cholesky_factor,
    fbm_sampler,
    stationary_sampler,
    stationary_two_sided_sampler,
)

logger = logging.getLogger(__name__)

# exp overflows just above 709.78
_MAX_EXPONENT = 709.0
# Largest Gram matrix factorized when the computational grid is not uniform.
CHOLESKY_LIMIT = 4096


@dataclass(frozen=True)
class TimeChange:
    """``a(t) = (H/α) e^{αt/H}``; at H = 1/2 this is ``e^{2αt}/(2α)``."""

    params: ModelParams

    def __call__(self, t):
        h, a = self.params.hurst, self.params.alpha
        exponent = a * np.asarray(t, dtype=float) / h
        if np.any(exponent > _MAX_EXPONENT):
            worst = float(np.max(np.asarray(t, dtype=float)))
            raise DomainError(f"time change a(t) overflows at t={worst}")
        value = (h / a) * np.exp(exponent)
        return float(value) if np.ndim(value) == 0 else value

    def inverse(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s <= 0):
            raise DomainError("inverse time change needs s > 0")
        h, a = self.params.hurst, self.params.alpha
        value = (h / a) * np.log(a * s / h)
        return float(value) if np.ndim(value) == 0 else value


def _resolve(refine: Optional[int], sampler: Optional[str]) -> tuple[int, SamplerMethod]:
    settings = get_settings()
    return refine or settings.refine, (sampler or settings.sampler)  # type: ignore[return-value]


def _check_budget(points: int) -> None:
    limit = get_settings().max_path_points
    if points > limit:
        raise BudgetError(f"path needs {points} points, above the budget of {limit}")


def _require_origin(grid: TimeGrid) -> None:
    if grid.times[0] != 0.0:
        raise UsageError("grid must start at t = 0")


def _uniform_step(times: np.ndarray) -> Optional[float]:
    if times.size < 2:
        return None
    steps = np.diff(times)
    if np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        return float(steps[0])
    return None


def doob_sampler(params: ModelParams, times: np.ndarray, method: SamplerMethod = "auto") -> GaussianSampler:
    """Exact sampler of the stationary process ``X`` at ``times``.

    ``X`` has the law of ``e^{-αt} Z_{a(t)}``; its covariance depends on the
    lag only, so uniform grids use circulant embedding and other grids a
    Cholesky factor of the (well conditioned) stationary Gram matrix.
    """
    times = np.asarray(times, dtype=float)
    TimeChange(params)(times)
    step = _uniform_step(times)
    if method != "cholesky" and step is not None:
        return stationary_sampler(
            lambda lags: analytics.xd_cov(params, 0.0, np.asarray(lags, dtype=float) * step),
            times.size,
            max_doublings=3,
            what="Doob transform",
        )
    if times.size > CHOLESKY_LIMIT:
        raise BudgetError(f"non-uniform grid of {times.size} points is too large for Cholesky sampling")
    gram = analytics.xd_cov(params, times[:, None], times[None, :])
    return CholeskySampler(cholesky_factor(np.atleast_2d(gram), what="Doob transform"))


def doob_from_fbm(params: ModelParams, times: np.ndarray, z_values: np.ndarray) -> np.ndarray:
    """Pathwise ``X_t = e^{-αt} Z_{a(t)}`` for FBM values sampled at ``a(times)``."""
    return np.exp(-params.alpha * np.asarray(times, dtype=float)) * z_values


def _ensemble(params: ModelParams, grid: TimeGrid, values: np.ndarray, seed: int, tag: ProcessTag, **meta: str) -> Ensemble:
    logger.info("Sampled ensemble", extra={"process_tag": tag.value, "count": values.shape[0], "points": grid.size, **meta})
    return Ensemble(params=params, grid=grid, values=values, seed=seed, process_tag=tag, meta=dict(meta))


def doob_transform(
    params: ModelParams,
    grid: TimeGrid,
    seed: int,
    count: int,
) -> Ensemble:
    """``X_t = e^{-αt} Z_{a(t)}`` with ``Z`` sampled exactly on the time-changed grid ``{a(t_i)}``."""
    times = grid.array
    _check_budget(grid.size)
    if times.size > CHOLESKY_LIMIT:
        raise BudgetError(f"grid of {times.size} points is too large for Cholesky sampling")
    changed = TimeChange(params)(times)
    source = fbm_sampler(params, np.atleast_1d(changed), "cholesky")

    def build(start: int, stop: int) -> np.ndarray:
        return doob_from_fbm(params, times, source.draw(seed, start, stop))

    values = map_chunks(build, count, get_settings().chunk_size, get_settings().workers)
    return _ensemble(params, grid, values, seed, ProcessTag.XD, method=source.method, time_change="fbm")


def ou_path(params: ModelParams, grid: TimeGrid, seed: int, count: int) -> Ensemble:
    """Classical stationary OU with rate α: the Doob transform of Brownian motion."""
    brownian = params.with_updates(hurst=0.5)
    ensemble = doob_transform(brownian, grid, seed, count)
    return Ensemble(
        params=brownian,
        grid=grid,
        values=ensemble.values,
        seed=seed,
        process_tag=ProcessTag.OU,
        meta=ensemble.meta,
    )


def y_from_doob(x_values: np.ndarray, times: np.ndarray, alpha: float) -> np.ndarray:
    """``Y_t = X_t - X_0 + α ∫_0^t X_s ds`` along the last axis."""
    x_values = np.atleast_2d(x_values)
    integral = integrate.cumulative_trapezoid(x_values, np.asarray(times, dtype=float), axis=-1, initial=0.0)
    return x_values - x_values[:, :1] + alpha * integral


def y_process(
    params: ModelParams,
    grid: TimeGrid,
    seed: int,
    count: int,
    *,
    refine: Optional[int] = None,
    sampler: Optional[SamplerMethod] = None,
) -> Ensemble:
    _require_origin(grid)
    factor, method = _resolve(refine, sampler)
    fine, index = refine_times(grid.array, factor)
    _check_budget(fine.size)
    source = doob_sampler(params, fine, method)

    def build(start: int, stop: int) -> np.ndarray:
        x_values = source.draw(seed, start, stop)
        return y_from_doob(x_values, fine, params.alpha)[:, index]

    values = map_chunks(build, count, get_settings().chunk_size, get_settings().workers)
    return _ensemble(params, grid, values, seed, ProcessTag.Y, method=source.method, refine=str(factor))


def rescale_y(params: ModelParams, ensemble: Ensemble) -> Ensemble:
    """Map ``Y^(α)`` on ``{t_i}`` to ``α^H Y^(α)`` on ``{α t_i}``, which has the law of ``Y^(1)``."""
    if ensemble.process_tag != ProcessTag.Y:
        raise UsageError(f"rescaling needs a Y ensemble, got {ensemble.process_tag.value}")
    alpha, h = params.alpha, params.hurst
    grid = TimeGrid.from_array(alpha * ensemble.grid.array)
    return Ensemble(
        params=params.with_updates(alpha=1.0),
        grid=grid,
        values=alpha**h * ensemble.values,
        seed=ensemble.seed,
        process_tag=ProcessTag.Y,
        meta={**ensemble.meta, "rescaled_from_alpha": repr(alpha)},
    )


def langevin_values(times: np.ndarray, driver: np.ndarray, rate: float, x0) -> np.ndarray:
    """Rows of ``U_t = e^{-rt} x0 + W_t - r ∫_0^t e^{-r(t-s)} W_s ds``.

    The convolution integral follows the exact exponential recursion between
    grid points with the trapezoid rule inside each step.
    """
    if not rate > 0:
        raise DomainError(f"Langevin rate must be positive, got {rate}")
    times = np.asarray(times, dtype=float)
    driver = np.atleast_2d(np.asarray(driver, dtype=float))
    decay = np.exp(-rate * np.diff(times))
    half_steps = 0.5 * np.diff(times)
    conv = np.zeros_like(driver)
    for k in range(times.size - 1):
        conv[:, k + 1] = decay[k] * conv[:, k] + half_steps[k] * (decay[k] * driver[:, k] + driver[:, k + 1])
    start = np.exp(-rate * (times - times[0]))
    x0 = np.asarray(x0, dtype=float).reshape(-1, 1) if np.ndim(x0) else x0
    return start * x0 + driver - rate * conv


def langevin_solve(driver: SamplePath, rate: float, x0: float) -> SamplePath:
    if driver.grid.times[0] != 0.0 or driver.values[0] != 0.0:
        raise UsageError("driver must start at time 0 with value 0")
    values = langevin_values(driver.grid.array, driver.values, rate, x0)[0]
    return SamplePath(driver.grid, values)


def _negative_lattice(step: float, cutoff: float) -> np.ndarray:
    """``0, step, ..., m·step`` with ``m·step >= -cutoff``."""
    count = int(math.ceil(-cutoff / step - 1e-9))
    return step * np.arange(count + 1)


def fou1_path(
    params: ModelParams,
    grid: TimeGrid,
    seed: int,
    count: int,
    init: Fou1Init = Fou1Init.ZERO,
    trunc: Optional[TruncationPolicy] = None,
    *,
    refine: Optional[int] = None,
    sampler: Optional[SamplerMethod] = None,
) -> Ensemble:
    """First-kind process ``dU = -αU dt + dZ``.

    ``Zero`` starts at 0. ``StationaryTruncated`` samples one two-sided FBM
    ``Ẑ`` on ``[L, t_max]`` and starts at ``ξ = ∫_L^0 e^{αs} dẐ_s``, so the
    start and the driving increments on ``[0, t_max]`` come from the same
    path. The discarded part has standard deviation ``e^{αL} sqrt(V)`` with
    ``V`` the stationary variance.
    """
    _require_origin(grid)
    factor, method = _resolve(refine, sampler)
    fine, index = refine_times(grid.array, factor)
    alpha = params.alpha
    meta = {"init": init.value, "refine": str(factor)}
    if init == Fou1Init.STATIONARY:
        trunc = trunc or TruncationPolicy(tolerance=get_settings().truncation_tolerance)
        variance = analytics.fou1_stationary_variance(params).value
        cutoff, bound = resolve_lower_cutoff(trunc, anchor=0.0, rate=alpha, scale=math.sqrt(variance))
        left = -_negative_lattice(float(np.min(np.diff(fine))), cutoff)[:0:-1]
        meta.update(cutoff=repr(cutoff), tail_bound=repr(bound))
    else:
        left = np.zeros(0)
    times = np.concatenate([left, fine])
    _check_budget(times.size)
    offset = left.size
    if offset:
        if method == "cholesky" or _uniform_step(times) is None:
            if times.size > CHOLESKY_LIMIT:
                raise BudgetError(f"non-uniform grid of {times.size} points is too large for Cholesky sampling")
        source = stationary_two_sided_sampler(params, times, method)
    else:
        source = fbm_sampler(params, fine, method)
    meta["method"] = source.method
    head = times[: offset + 1]
    weights = alpha * np.exp(alpha * head)

    def build(start: int, stop: int) -> np.ndarray:
        z_values = source.draw(seed, start, stop)
        x0: np.ndarray | float = 0.0
        if offset:
            # ξ = Ẑ_0 - e^{αL} Ẑ_L - α ∫_L^0 e^{αs} Ẑ_s ds with Ẑ_0 = 0
            z_left = z_values[:, : offset + 1]
            mass = integrate.trapezoid(weights * z_left, head, axis=1)
            x0 = -np.exp(alpha * head[0]) * z_left[:, 0] - mass
        return langevin_values(fine, z_values[:, offset:], alpha, x0)[:, index]

    values = map_chunks(build, count, get_settings().chunk_size, get_settings().workers)
    return _ensemble(params, grid, values, seed, ProcessTag.FOU1, **meta)


def fou2_cutoff(params: ModelParams, trunc: TruncationPolicy) -> tuple[float, float]:
    """Cutoff for ``∫_{-∞}^0 e^{γs} dY_s``; the tail has sd at most ``H^H (1 + |1-γ|/γ) e^{γL}``."""
    h, gamma = params.hurst, params.gamma
    scale = h**h * (1.0 + abs(1.0 - gamma) / gamma)
    return resolve_lower_cutoff(trunc, anchor=0.0, rate=gamma, scale=scale)


def fou2_path(
    params: ModelParams,
    grid: TimeGrid,
    seed: int,
    count: int,
    method: Fou2Method = Fou2Method.LANGEVIN_ON_Y,
    trunc: Optional[TruncationPolicy] = None,
    *,
    refine: Optional[int] = None,
    sampler: Optional[SamplerMethod] = None,
) -> Ensemble:
    """Second-kind process ``dU = -γU dt + dY^(1)``, stationary start.

    Both methods consume the same ``X`` (α = 1) sample on ``[L, t_max]``:

    * ``LangevinOnY``: ``ξ = X_0 - e^{γL} X_L + (1-γ) ∫_L^0 e^{γs} X_s ds``,
      then the Langevin solver on ``Y^(1)`` built from ``X`` on ``[0, t]``.
    * ``DirectTransform``: ``H^{-β} e^{-γt} ∫_{a_L}^{a_t} s^β dZ_s`` with
      ``β = (γ-1)H`` and ``Z_{a_u} = e^u X_u``, by partial integration in ``s``.
    """
    _require_origin(grid)
    trunc = trunc or TruncationPolicy(tolerance=get_settings().truncation_tolerance)
    factor, sampler_method = _resolve(refine, sampler)
    unit = params.with_updates(alpha=1.0)
    h, gamma = unit.hurst, unit.gamma
    fine, index = refine_times(grid.array, factor)
    cutoff, bound = fou2_cutoff(unit, trunc)
    left = -_negative_lattice(float(np.min(np.diff(fine))), cutoff)[:0:-1]
    times = np.concatenate([left, fine])
    _check_budget(times.size)
    offset = left.size
    source = doob_sampler(unit, times, sampler_method)
    lower = times[0]
    beta = (gamma - 1.0) * h
    change = TimeChange(unit)

    def build(start: int, stop: int) -> np.ndarray:
        x_values = source.draw(seed, start, stop)
        if method == Fou2Method.LANGEVIN_ON_Y:
            head = x_values[:, : offset + 1]
            mass = integrate.trapezoid(np.exp(gamma * times[: offset + 1]) * head, times[: offset + 1], axis=1)
            xi = head[:, -1] - np.exp(gamma * lower) * head[:, 0] + (1.0 - gamma) * mass
            y_values = y_from_doob(x_values[:, offset:], fine, 1.0)
            return langevin_values(fine, y_values, gamma, xi)[:, index]
        s = change(times)
        z_values = np.exp(times) * x_values
        running = integrate.cumulative_trapezoid(s ** (beta - 1.0) * z_values, s, axis=1, initial=0.0)
        inner = s**beta * z_values - s[0] ** beta * z_values[:, :1] - beta * running
        return (h ** (-beta) * np.exp(-gamma * times) * inner)[:, offset:][:, index]

    values = map_chunks(build, count, get_settings().chunk_size, get_settings().workers)
    return _ensemble(
        params,
        grid,
        values,
        seed,
        ProcessTag.FOU2,
        method=method.value,
        sampler=source.method,
        cutoff=repr(cutoff),
        tail_bound=repr(bound),
        refine=str(factor),
    )
