"""Fractional Brownian motion: analytic covariances and exact Gaussian samplers."""
from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Literal, Optional

import numpy as np
from scipy import linalg

from ..config import get_settings
from ..errors import CovarianceConsistencyError, DomainError, UsageError
from ..schemas import CovMatrix, Ensemble, ModelParams, ProcessTag, QuadratureConfig, QuadResult, TimeGrid
from ..utils.grids import next_power_of_two
from ..utils.quadrature import SingularKernel, check_tolerance, rectangle_integral
from ..utils.rng import StreamKey, map_chunks, standard_normals, substream

logger = logging.getLogger(__name__)

SamplerMethod = Literal["auto", "cholesky", "circulant"]

PSD_TOLERANCE = 1e-8
JITTER_START = 1e-12
JITTER_LIMIT = 1e-8
CIRCULANT_NEGATIVE_TOLERANCE = 1e-10


def _require_nonnegative(*times: float) -> None:
    for t in times:
        if t < 0:
            raise DomainError(f"one-sided FBM is defined for t >= 0, got t={t}")


def _increment_formula(two_h: float, t1, t2, s1, s2) -> np.ndarray:
    """Increment covariance on 1-d float arrays; scalars and vectors share this one expression."""
    t1, t2, s1, s2 = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (t1, t2, s1, s2))
    return 0.5 * (
        (np.abs(t2 - s1) ** two_h + np.abs(t1 - s2) ** two_h)
        - (np.abs(t2 - s2) ** two_h + np.abs(t1 - s1) ** two_h)
    )


def fbm_cov(params: ModelParams, s: float, t: float) -> float:
    _require_nonnegative(s, t)
    h2 = params.two_h
    return 0.5 * (t**h2 + s**h2 - abs(t - s) ** h2)


def fbm_increment_cov(params: ModelParams, t1: float, t2: float, s1: float, s2: float) -> float:
    """``E((Z_t2 - Z_t1)(Z_s2 - Z_s1))`` for any two windows; degenerate windows give 0."""
    _require_nonnegative(t1, t2, s1, s2)
    if t2 < t1 or s2 < s1:
        raise UsageError("increment windows must satisfy t1 <= t2 and s1 <= s2")
    return float(_increment_formula(params.two_h, t1, t2, s1, s2)[0])


def fgn_autocov(params: ModelParams, n):
    """Autocovariance of unit-step fractional Gaussian noise at integer lag ``n``.

    Accepts a scalar or an array of lags; negative lags are folded by symmetry.
    """
    lags = np.asarray(n, dtype=float)
    lag = np.abs(np.atleast_1d(lags))
    value = _increment_formula(params.two_h, lag, lag + 1.0, 0.0, 1.0)
    return float(value[0]) if lags.ndim == 0 else value.reshape(lags.shape)


def fgn_autocov_asymptotic(params: ModelParams, n: float) -> float:
    h = params.hurst
    return h * (2.0 * h - 1.0) * n ** (-2.0 * (1.0 - h))


def _gram(params: ModelParams, times: np.ndarray) -> np.ndarray:
    powered = times**params.two_h
    distance = np.abs(times[:, None] - times[None, :]) ** params.two_h
    return 0.5 * (powered[:, None] + powered[None, :] - distance)


def check_psd(entries: np.ndarray, what: str) -> float:
    max_diag = float(np.max(np.diag(entries))) if entries.size else 0.0
    min_eig = float(np.linalg.eigvalsh(entries)[0]) if entries.size else 0.0
    if min_eig < -PSD_TOLERANCE * max(max_diag, 0.0):
        raise CovarianceConsistencyError(f"{what} covariance matrix is not positive semidefinite", min_eigenvalue=min_eig)
    return min_eig


def build_cov_matrix(params: ModelParams, grid: TimeGrid) -> CovMatrix:
    times = grid.array
    _require_nonnegative(float(times[0]))
    entries = _gram(params, times)
    check_psd(entries, "FBM")
    return CovMatrix(grid=grid, entries=entries)


def cholesky_factor(entries: np.ndarray, *, what: str = "covariance") -> np.ndarray:
    """Lower Cholesky factor, adding diagonal jitter relative to the largest variance when needed."""
    try:
        return np.linalg.cholesky(entries)
    except np.linalg.LinAlgError:
        pass
    scale = float(np.max(np.diag(entries)))
    jitter = JITTER_START
    identity = np.eye(entries.shape[0])
    while jitter <= JITTER_LIMIT * (1.0 + 1e-9):
        logger.warning("Cholesky failed; retrying with jitter", extra={"what": what, "jitter": jitter * scale})
        try:
            return np.linalg.cholesky(entries + jitter * scale * identity)
        except np.linalg.LinAlgError:
            jitter *= 10.0
    min_eig = float(np.linalg.eigvalsh(entries)[0])
    raise CovarianceConsistencyError(f"Cholesky of {what} failed after jitter", min_eigenvalue=min_eig)


class GaussianSampler(ABC):
    """Draws rows of a fixed centered Gaussian vector; row ``i`` only uses path stream ``i``."""

    size: int
    method: str

    @abstractmethod
    def draw(self, seed: int, start: int, stop: int, stream: StreamKey = 0) -> np.ndarray: ...

    def sample(
        self,
        seed: int,
        count: int,
        *,
        stream: StreamKey = 0,
        chunk_size: Optional[int] = None,
        workers: Optional[int] = None,
    ) -> np.ndarray:
        if count < 1:
            raise UsageError("path count must be at least 1")
        settings = get_settings()
        return map_chunks(
            lambda start, stop: self.draw(seed, start, stop, stream),
            count,
            chunk_size or settings.chunk_size,
            workers or settings.workers,
        )


@dataclass(frozen=True)
class CholeskySampler(GaussianSampler):
    factor: np.ndarray
    method: str = "cholesky"

    @property
    def size(self) -> int:
        return int(self.factor.shape[0])

    def draw(self, seed: int, start: int, stop: int, stream: StreamKey = 0) -> np.ndarray:
        normals = standard_normals(seed, start, stop, self.size, stream)
        # one matrix-vector product per path keeps values independent of the chunk layout
        return np.stack([self.factor @ z for z in normals])


@dataclass(frozen=True)
class CirculantSampler(GaussianSampler):
    """Real part of the FFT of a scaled complex white noise on the circulant embedding."""

    sqrt_eigenvalues: np.ndarray
    size: int
    method: str = "circulant"

    def draw(self, seed: int, start: int, stop: int, stream: StreamKey = 0) -> np.ndarray:
        embed = self.sqrt_eigenvalues.size
        normals = standard_normals(seed, start, stop, 2 * embed, stream)
        noise = (normals[:, :embed] + 1j * normals[:, embed:]) * self.sqrt_eigenvalues
        return np.stack([np.fft.fft(row).real[: self.size] for row in noise])


@dataclass(frozen=True)
class CumulativeSampler(GaussianSampler):
    """Scaled partial sums of a stationary increment sampler."""

    increments: GaussianSampler
    scale: float

    @property
    def size(self) -> int:
        return self.increments.size

    @property
    def method(self) -> str:
        return self.increments.method

    def draw(self, seed: int, start: int, stop: int, stream: StreamKey = 0) -> np.ndarray:
        return np.cumsum(self.increments.draw(seed, start, stop, stream), axis=1) * self.scale


@dataclass(frozen=True)
class OriginSampler(GaussianSampler):
    """Prepends the anchored value 0 at t = 0."""

    inner: Optional[GaussianSampler]

    @property
    def size(self) -> int:
        return 1 + (self.inner.size if self.inner else 0)

    @property
    def method(self) -> str:
        return self.inner.method if self.inner else "none"

    def draw(self, seed: int, start: int, stop: int, stream: StreamKey = 0) -> np.ndarray:
        zeros = np.zeros((stop - start, 1))
        if self.inner is None:
            return zeros
        return np.hstack([zeros, self.inner.draw(seed, start, stop, stream)])


@dataclass(frozen=True)
class TwoSidedSampler(GaussianSampler):
    """Independent one-sided samplers for ``|t|`` at negative and positive times.

    The halves are uncorrelated, so increments across 0 are not stationary
    unless H = 1/2; see :func:`stationary_two_sided_sampler`.
    """

    negative: GaussianSampler
    positive: GaussianSampler
    method: str = "two-sided"

    @property
    def size(self) -> int:
        return self.negative.size + self.positive.size

    def draw(self, seed: int, start: int, stop: int, stream: StreamKey = 0) -> np.ndarray:
        left = self.negative.draw(seed, start, stop, substream(stream, 1))[:, ::-1]
        right = self.positive.draw(seed, start, stop, substream(stream, 0))
        return np.hstack([left, right])


def circulant_sqrt_eigenvalues(row: np.ndarray) -> Optional[np.ndarray]:
    """``sqrt(lambda / M)`` for the circulant matrix with first row ``row``, or None when it is not PSD."""
    eigenvalues = np.fft.fft(row).real
    largest = float(np.max(eigenvalues))
    if float(np.min(eigenvalues)) < -CIRCULANT_NEGATIVE_TOLERANCE * largest:
        return None
    return np.sqrt(np.clip(eigenvalues, 0.0, None) / row.size)


def stationary_sampler(
    acov: Callable[[np.ndarray], np.ndarray],
    size: int,
    *,
    max_doublings: int = 0,
    what: str = "stationary sequence",
) -> GaussianSampler:
    """Exact sampler of a stationary sequence given its autocovariance at integer lags."""
    if size < 1:
        raise UsageError("sequence length must be at least 1")
    if size == 1:
        return CholeskySampler(np.sqrt(np.atleast_2d(acov(np.zeros(1)))))
    embed = next_power_of_two(2 * (size - 1))
    for _ in range(max_doublings + 1):
        half = np.asarray(acov(np.arange(embed // 2 + 1)), dtype=float)
        row = np.concatenate([half, half[-2:0:-1]])
        sqrt_eigenvalues = circulant_sqrt_eigenvalues(row)
        if sqrt_eigenvalues is not None:
            return CirculantSampler(sqrt_eigenvalues, size)
        embed *= 2
    logger.warning(
        "Circulant embedding has negative eigenvalues; falling back to Cholesky",
        extra={"what": what, "size": size, "embedding": embed // 2},
    )
    toeplitz = linalg.toeplitz(np.asarray(acov(np.arange(size)), dtype=float))
    return CholeskySampler(cholesky_factor(toeplitz, what=what))


def fgn_sampler(params: ModelParams, size: int) -> GaussianSampler:
    return stationary_sampler(lambda lags: fgn_autocov(params, lags), size, what="fractional Gaussian noise")


def _is_lattice(times: np.ndarray) -> bool:
    if times.size < 2:
        return False
    step = times[0]
    return bool(np.allclose(times, step * np.arange(1, times.size + 1), rtol=1e-9, atol=0.0))


def fbm_sampler(params: ModelParams, times: np.ndarray, method: SamplerMethod = "cholesky") -> GaussianSampler:
    """Sampler of ``Z`` at nonnegative increasing ``times``.

    ``Z_0 = 0`` is forced and never factorized. ``auto`` and ``circulant`` use
    the FFT path when the positive times form a lattice ``dt, 2dt, ...``.
    """
    times = np.asarray(times, dtype=float)
    if times.size and times[0] < 0:
        raise DomainError(f"one-sided FBM is defined for t >= 0, got t={times[0]}")
    origin = bool(times.size) and times[0] == 0.0
    positive = times[1:] if origin else times
    inner: Optional[GaussianSampler] = None
    if positive.size:
        if method != "cholesky" and _is_lattice(positive):
            dt = float(positive[0])
            inner = CumulativeSampler(fgn_sampler(params, positive.size), dt**params.hurst)
        else:
            inner = CholeskySampler(cholesky_factor(_gram(params, positive), what="FBM"))
    if origin:
        return OriginSampler(inner)
    if inner is None:
        raise UsageError("FBM sampler needs at least one time")
    return inner


def two_sided_fbm_sampler(params: ModelParams, times: np.ndarray, method: SamplerMethod = "cholesky") -> GaussianSampler:
    """Sampler of two-sided ``Ẑ`` at increasing ``times`` that contain 0 or straddle it."""
    times = np.asarray(times, dtype=float)
    negative = times[times < 0]
    rest = times[times >= 0]
    if negative.size == 0:
        return fbm_sampler(params, rest, method)
    left = fbm_sampler(params, -negative[::-1], method)
    if rest.size == 0:
        return _Reversed(left)
    return TwoSidedSampler(left, fbm_sampler(params, rest, method))


@dataclass(frozen=True)
class _Reversed(GaussianSampler):
    inner: GaussianSampler
    method: str = "two-sided"

    @property
    def size(self) -> int:
        return self.inner.size

    def draw(self, seed: int, start: int, stop: int, stream: StreamKey = 0) -> np.ndarray:
        return self.inner.draw(seed, start, stop, substream(stream, 1))[:, ::-1]


@dataclass(frozen=True)
class AnchoredSampler(GaussianSampler):
    """Subtracts column ``anchor`` from every column of the inner draw."""

    inner: GaussianSampler
    anchor: int

    @property
    def size(self) -> int:
        return self.inner.size

    @property
    def method(self) -> str:
        return self.inner.method

    def draw(self, seed: int, start: int, stop: int, stream: StreamKey = 0) -> np.ndarray:
        values = self.inner.draw(seed, start, stop, stream)
        return values - values[:, self.anchor : self.anchor + 1]


def stationary_two_sided_sampler(params: ModelParams, times: np.ndarray, method: SamplerMethod = "cholesky") -> GaussianSampler:
    """Two-sided ``Ẑ`` with stationary increments across 0, at increasing ``times`` containing 0.

    ``Ẑ_t = W_{t-L} - W_{-L}`` for a one-sided FBM ``W`` and ``L = times[0]``,
    so ``E(Ẑ_s Ẑ_t) = (|s|^{2H} + |t|^{2H} - |t-s|^{2H}) / 2`` for all signs.
    Uniform ``times`` make ``t - L`` a lattice for the FFT sampler.
    """
    times = np.asarray(times, dtype=float)
    zero = int(np.searchsorted(times, 0.0))
    if zero >= times.size or times[zero] != 0.0:
        raise UsageError("two-sided grid must contain t = 0")
    if zero == 0:
        return fbm_sampler(params, times, method)
    return AnchoredSampler(fbm_sampler(params, times - times[0], method), zero)


def _ensemble(params: ModelParams, grid: TimeGrid, sampler: GaussianSampler, seed: int, count: int, **meta: str) -> Ensemble:
    values = sampler.sample(seed, count)
    logger.info(
        "Sampled FBM ensemble",
        extra={"count": count, "points": grid.size, "method": sampler.method, "hurst": params.hurst},
    )
    return Ensemble(
        params=params,
        grid=grid,
        values=values,
        seed=seed,
        process_tag=ProcessTag.FBM,
        meta={"method": sampler.method, **meta},
    )


def sample_fbm(params: ModelParams, grid: TimeGrid, seed: int, count: int, method: SamplerMethod = "cholesky") -> Ensemble:
    """FBM ensemble on ``grid``; grids reaching below 0 get the two-sided process."""
    if grid.times[0] < 0:
        sampler = two_sided_fbm_sampler(params, grid.array, method)
        return _ensemble(params, grid, sampler, seed, count, sides="two")
    return _ensemble(params, grid, fbm_sampler(params, grid.array, method), seed, count)


def sample_fbm_cholesky(params: ModelParams, grid: TimeGrid, seed: int, count: int) -> Ensemble:
    """Exact FBM ensemble on an arbitrary nonnegative grid.

    Args:
        params: model parameters; only ``hurst`` is used.
        grid: sample times, all ``>= 0``; a leading 0 carries the anchored value 0.
        seed: root seed of the per-path streams.
        count: number of paths.
    """
    if grid.times[0] < 0:
        raise DomainError(f"one-sided FBM is defined for t >= 0, got t={grid.times[0]}")
    return sample_fbm(params, grid, seed, count, "cholesky")


def sample_fgn_circulant(params: ModelParams, n: int, dt: float, seed: int, count: int) -> Ensemble:
    """FBM on ``{dt, 2dt, ..., n dt}`` as scaled partial sums of circulant-sampled noise."""
    if n < 2 or n & (n - 1):
        raise UsageError(f"circulant sampler needs n >= 2 a power of two, got n={n}")
    if not dt > 0:
        raise UsageError(f"time step must be positive, got dt={dt}")
    grid = TimeGrid.from_array(dt * np.arange(1, n + 1))
    sampler = CumulativeSampler(fgn_sampler(params, n), dt**params.hurst)
    return _ensemble(params, grid, sampler, seed, count, dt=repr(dt))


def sample_two_sided_fbm(params: ModelParams, grid: TimeGrid, seed: int, count: int) -> Ensemble:
    times = grid.array
    if not (times[0] < 0 < times[-1]):
        raise UsageError("two-sided FBM grid must span negative and positive times")
    return sample_fbm(params, grid, seed, count, "cholesky")


def fbm_increment_cov_kernel(
    params: ModelParams,
    t1: float,
    t2: float,
    s1: float,
    s2: float,
    quad: Optional[QuadratureConfig] = None,
) -> QuadResult:
    """Increment covariance as ``∫∫ H(2H-1)|u-v|^{2H-2} du dv`` over the two windows (H > 1/2)."""
    params.require_kernel_regime()
    quad = quad or QuadratureConfig()
    h = params.hurst
    constant = h * (2.0 * h - 1.0)
    kernel = SingularKernel(lambda _x: constant, h)
    result = rectangle_integral(kernel, (t1, t2), (s1, s2), quad)
    return check_tolerance(result, quad, "FBM increment kernel")
