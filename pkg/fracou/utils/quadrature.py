"""Adaptive quadrature for kernels with an integrable ``|x|^{2H-2}`` singularity at 0.

A kernel is written ``k(x) = smooth(|x|) * |x|^{2H-2}``. Near the singular
endpoint the substitution ``x = w^{1/(2H-1)}`` turns ``k(x) dx`` into
``smooth(x) / (2H-1) dw``, a bounded integrand. Double integrals over
rectangles are split along the diagonal ``u = v``: the inner integral runs in the
normal direction ``x = u - v`` and gets the substitution on both sides of 0.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from scipy import integrate

from ..errors import ConfigurationError, QuadratureError
from ..schemas import QuadratureConfig, QuadResult, TruncationPolicy

logger = logging.getLogger(__name__)

# Largest exponent that still leaves exp(-x) representable with room to spare.
_MAX_LOG_RATIO = 700.0


@dataclass(frozen=True)
class SingularKernel:
    smooth: Callable[[float], float]
    hurst: float

    @property
    def power(self) -> float:
        return 2.0 * self.hurst - 1.0

    def __call__(self, x: float) -> float:
        x = abs(x)
        return self.smooth(x) * x ** (2.0 * self.hurst - 2.0)


def adaptive_quad(
    f: Callable[[float], float],
    a: float,
    b: float,
    quad: QuadratureConfig,
    *,
    epsrel: Optional[float] = None,
    epsabs: Optional[float] = None,
    points: Sequence[float] = (),
) -> QuadResult:
    if b <= a:
        return QuadResult(0.0, 0.0)
    inner_points = sorted({p for p in points if a < p < b})
    result = integrate.quad(
        f,
        a,
        b,
        epsabs=quad.abs_tol if epsabs is None else epsabs,
        epsrel=quad.rel_tol if epsrel is None else epsrel,
        limit=quad.max_subdivisions,
        points=inner_points or None,
        full_output=1,
    )
    value, error = float(result[0]), float(result[1])
    if len(result) > 3:
        logger.debug("QUADPACK reported", extra={"quadpack_message": result[3], "a": a, "b": b, "error": error})
    return QuadResult(value, error)


def kernel_integral(
    kernel: SingularKernel,
    lo: float,
    hi: float,
    quad: QuadratureConfig,
    weight: Optional[Callable[[float], float]] = None,
    *,
    split: float = 1.0,
    epsrel: Optional[float] = None,
    epsabs: Optional[float] = None,
) -> QuadResult:
    """``∫_lo^hi weight(x) k(x) dx`` for ``0 <= lo < hi``."""
    if hi <= lo:
        return QuadResult(0.0, 0.0)
    weight = weight or (lambda _x: 1.0)
    p = kernel.power
    inv_p = quad.singularity_substitution_exponent(kernel.hurst)
    epsabs = quad.abs_tol if epsabs is None else epsabs
    value = 0.0
    error = 0.0
    near_hi = min(hi, split)
    if lo < near_hi:

        def near(w: float) -> float:
            x = w**inv_p
            return weight(x) * kernel.smooth(x) * inv_p

        part = adaptive_quad(near, lo**p, near_hi**p, quad, epsrel=epsrel, epsabs=epsabs / 2.0)
        value += part.value
        error += part.error
    far_lo = max(lo, split)
    if far_lo < hi:
        part = adaptive_quad(
            lambda x: weight(x) * kernel(x), far_lo, hi, quad, epsrel=epsrel, epsabs=epsabs / 2.0
        )
        value += part.value
        error += part.error
    return QuadResult(value, error)


def symmetric_kernel_integral(
    kernel: SingularKernel,
    lo: float,
    hi: float,
    quad: QuadratureConfig,
    weight: Optional[Callable[[float], float]] = None,
    **tolerances: float,
) -> QuadResult:
    """``∫_lo^hi weight(x) k(|x|) dx`` for any ``lo < hi``; split at the singular point 0."""
    weight = weight or (lambda _x: 1.0)
    if lo >= 0.0:
        return kernel_integral(kernel, lo, hi, quad, weight, **tolerances)
    if hi <= 0.0:
        return kernel_integral(kernel, -hi, -lo, quad, lambda y: weight(-y), **tolerances)
    left = kernel_integral(kernel, 0.0, -lo, quad, lambda y: weight(-y), **tolerances)
    right = kernel_integral(kernel, 0.0, hi, quad, weight, **tolerances)
    return QuadResult(left.value + right.value, left.error + right.error)


def rectangle_integral(
    kernel: SingularKernel,
    u_range: tuple[float, float],
    v_range: tuple[float, float],
    quad: QuadratureConfig,
    weight: Optional[Callable[[float, float], float]] = None,
) -> QuadResult:
    """``∫_{u_range} ∫_{v_range} weight(u, v) k(u - v) dv du``.

    The reported error is the outer estimate plus the inner estimates
    integrated over the outer variable by the trapezoid rule on the nodes the
    outer rule visited, held constant out to the interval ends.
    """
    a, b = u_range
    c, d = v_range
    if b <= a or d <= c:
        return QuadResult(0.0, 0.0)
    length = b - a
    inner_abs = quad.abs_tol / (4.0 * length)
    inner_rel = quad.rel_tol / 4.0
    inner_errors: list[tuple[float, float]] = []

    def inner(u: float) -> float:
        if weight is None:
            w = None
        else:
            w = lambda x: weight(u, u - x)  # noqa: E731
        part = symmetric_kernel_integral(
            kernel, u - d, u - c, quad, w, epsrel=inner_rel, epsabs=inner_abs
        )
        inner_errors.append((u, part.error))
        return part.value

    outer = adaptive_quad(
        inner, a, b, quad, epsrel=quad.rel_tol / 2.0, epsabs=quad.abs_tol / 2.0, points=(c, d)
    )
    return QuadResult(outer.value, outer.error + _integrated_error(inner_errors, a, b))


def _integrated_error(samples: list[tuple[float, float]], a: float, b: float) -> float:
    if not samples:
        return 0.0
    samples.sort()
    nodes = [u for u, _ in samples]
    errors = [e for _, e in samples]
    inside = float(integrate.trapezoid(errors, nodes)) if len(samples) > 1 else 0.0
    return inside + errors[0] * (nodes[0] - a) + errors[-1] * (b - nodes[-1])


def check_tolerance(result: QuadResult, quad: QuadratureConfig, what: str) -> QuadResult:
    if not math.isfinite(result.value) or result.error > quad.tolerance_for(result.value):
        raise QuadratureError(f"quadrature for {what} did not reach tolerance", estimate=result.value, error=result.error)
    return result


def resolve_lower_cutoff(
    policy: TruncationPolicy,
    *,
    anchor: float,
    rate: float,
    scale: float,
) -> tuple[float, float]:
    """Cutoff ``L`` for a tail bounded by ``scale * exp(rate * (L - anchor))``.

    Returns the cutoff and the bound it achieves. An explicit
    ``policy.lower_cutoff`` is validated against ``policy.tolerance``.
    """
    if rate <= 0 or scale <= 0:
        raise ConfigurationError("truncation needs a positive decay rate and scale")
    log_ratio = math.log(scale / policy.tolerance)
    if log_ratio > _MAX_LOG_RATIO:
        raise ConfigurationError(
            f"truncation tolerance {policy.tolerance!r} is below floating point resolution for this integrand"
        )
    if policy.lower_cutoff is None:
        cutoff = anchor - max(log_ratio, 0.0) / rate
    else:
        cutoff = policy.lower_cutoff
        if cutoff >= anchor:
            raise ConfigurationError(f"lower cutoff {cutoff} must lie below {anchor}")
    bound = scale * math.exp(rate * (cutoff - anchor))
    if bound > policy.tolerance * (1.0 + 1e-12):
        raise ConfigurationError(
            f"lower cutoff {cutoff} leaves a tail bound {bound:.3e} above tolerance {policy.tolerance:.3e}"
        )
    logger.debug("Resolved truncation cutoff", extra={"cutoff": cutoff, "bound": bound})
    return cutoff, bound
