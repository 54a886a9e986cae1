from __future__ import annotations

import math

import numpy as np

from ..errors import UsageError


def parse_range(text: str) -> np.ndarray:
    """``start:stop:step`` with an inclusive end point, e.g. ``0:20:0.1``."""
    try:
        start, stop, step = (float(part) for part in text.split(":"))
    except ValueError as exc:
        raise UsageError(f"expected start:stop:step, got {text!r}") from exc
    if step <= 0 or stop < start or not all(map(math.isfinite, (start, stop, step))):
        raise UsageError(f"invalid range {text!r}: need step > 0 and stop >= start")
    count = int(round((stop - start) / step))
    return start + step * np.arange(count + 1)


def parse_float_list(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma separated numbers, got {text!r}") from exc
    if not values:
        raise UsageError("empty list")
    return values


def parse_pairs(text: str) -> list[tuple[float, float]]:
    """``s:t`` pairs separated by commas, e.g. ``1:2,0.5:3``."""
    pairs: list[tuple[float, float]] = []
    for chunk in text.split(","):
        try:
            s, t = (float(part) for part in chunk.split(":"))
        except ValueError as exc:
            raise UsageError(f"expected s:t pairs, got {chunk!r}") from exc
        pairs.append((s, t))
    return pairs


def refine_times(times: np.ndarray, factor: int) -> tuple[np.ndarray, np.ndarray]:
    """Split every grid interval into ``factor`` equal parts.

    Returns the refined times and the positions of the original points in them.
    """
    if factor < 1:
        raise UsageError("refinement factor must be >= 1")
    times = np.asarray(times, dtype=float)
    if times.size == 1:
        return times.copy(), np.zeros(1, dtype=int)
    fractions = np.arange(factor) / factor
    inner = times[:-1, None] + np.diff(times)[:, None] * fractions[None, :]
    refined = np.append(inner.ravel(), times[-1])
    return refined, np.arange(times.size) * factor


def next_power_of_two(n: int) -> int:
    return 1 << max(0, (int(n) - 1).bit_length())
