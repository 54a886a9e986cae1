"""Counter-based random streams: one Philox stream per (seed, stream key, path index).

Path ``i`` always consumes the same stream, so chunking and worker count never
change the generated values.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Union

import numpy as np

StreamKey = Union[int, tuple[int, ...]]


def substream(stream: StreamKey, part: int) -> tuple[int, ...]:
    """Independent child key, e.g. the negative half of a two-sided path."""
    key = (stream,) if isinstance(stream, int) else tuple(stream)
    return (*key, part)


def path_generator(seed: int, index: int, stream: StreamKey = 0) -> np.random.Generator:
    key = (stream,) if isinstance(stream, int) else tuple(stream)
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(*key, index))
    return np.random.Generator(np.random.Philox(sequence))


def standard_normals(seed: int, start: int, stop: int, dim: int, stream: StreamKey = 0) -> np.ndarray:
    out = np.empty((stop - start, dim))
    for row, index in enumerate(range(start, stop)):
        out[row] = path_generator(seed, index, stream).standard_normal(dim)
    return out


def map_chunks(
    build: Callable[[int, int], np.ndarray],
    count: int,
    chunk_size: int,
    workers: int = 1,
) -> np.ndarray:
    """Evaluate ``build(start, stop)`` over fixed path chunks and stack the rows."""
    bounds = [(start, min(start + chunk_size, count)) for start in range(0, count, chunk_size)]
    if workers <= 1 or len(bounds) == 1:
        parts = [build(start, stop) for start, stop in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: build(*b), bounds))
    return np.vstack(parts)
