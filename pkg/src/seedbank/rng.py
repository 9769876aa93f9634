"""Reproducible random streams and chunked replicate scheduling.

Replicates are grouped into fixed-size chunks. Chunk ``c`` of experiment ``e``
under master seed ``s`` always draws from the stream keyed by ``(s, e, c)``, so
results do not depend on how many workers run the chunks or in what order.
"""
from __future__ import annotations

import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Iterable

import numpy as np

CHUNK_SIZE = 8192
MASK64 = (1 << 64) - 1


def experiment_key(name: str) -> int:
    return zlib.crc32(name.encode("utf-8"))


def stream(seed: int, experiment: str, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & MASK64, spawn_key=(experiment_key(experiment), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def chunk_sizes(n: int, chunk: int = CHUNK_SIZE) -> list[int]:
    if n < 1:
        raise ValueError("need at least one replicate")
    full, rest = divmod(n, chunk)
    return [chunk] * full + ([rest] if rest else [])


def default_workers() -> int:
    env = os.environ.get("SEEDBANK_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


_WORKERS: int | None = None


def set_workers(n: int | None) -> None:
    global _WORKERS
    _WORKERS = n


def workers() -> int:
    return _WORKERS if _WORKERS is not None else default_workers()


def _call(args):
    fn, seed, experiment, index, size, kwargs = args
    return fn(stream(seed, experiment, index), size, **kwargs)


def map_chunks(
    fn: Callable[..., Any],
    n: int,
    seed: int,
    experiment: str,
    chunk: int = CHUNK_SIZE,
    n_workers: int | None = None,
    **kwargs,
) -> list[Any]:
    """Run ``fn(rng, size, **kwargs)`` once per chunk; results in chunk order."""
    jobs = [(fn, seed, experiment, i, size, kwargs) for i, size in enumerate(chunk_sizes(n, chunk))]
    n_workers = workers() if n_workers is None else n_workers
    if n_workers <= 1 or len(jobs) == 1:
        return [_call(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(n_workers, len(jobs))) as ex:
        return list(ex.map(_call, jobs))


def concat(parts: Iterable[Any]):
    """Concatenate per-chunk arrays (or tuples of arrays) along the replicate axis."""
    parts = list(parts)
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate(p) for p in zip(*parts))
    return np.concatenate(parts)
