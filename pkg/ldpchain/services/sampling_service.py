from __future__ import annotations

import logging
from dataclasses import dataclass
from multiprocessing import Pool
from typing import Any, Callable

import numpy as np
from scipy import stats

from ldpchain.config import settings
from ldpchain.kernels.base import X_INIT, KernelModel, State, sample_paths

logger = logging.getLogger("ldpchain.sampling")

# Batch of words (size, n, d), or (size, copies, n, d) for tuples of independent
# words, -> hit mask of shape (size,) or (size, m) for m nested events.
BatchPredicate = Callable[[np.ndarray], np.ndarray]


def clopper_pearson(hits: int, samples: int, level: float | None = None) -> tuple[float, float]:
    """Exact two-sided binomial interval."""
    level = settings.ldp_ci_level if level is None else level
    if samples <= 0:
        return 0.0, 1.0
    alpha = 1.0 - level
    lower = 0.0 if hits == 0 else float(stats.beta.ppf(alpha / 2, hits, samples - hits + 1))
    upper = 1.0 if hits == samples else float(stats.beta.isf(alpha / 2, hits + 1, samples - hits))
    return max(lower, 0.0), min(upper, 1.0)


def chunk_sizes(samples: int, chunk_size: int | None = None) -> list[int]:
    size = chunk_size or settings.ldp_chunk_size
    full, rest = divmod(samples, size)
    return [size] * full + ([rest] if rest else [])


def chunk_streams(seed: int | np.random.SeedSequence, chunks: int) -> list[np.random.SeedSequence]:
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return root.spawn(chunks)


@dataclass(frozen=True)
class PathJob:
    """Everything a worker needs to draw one chunk of paths and count hits.

    Must stay picklable: models and predicates are module-level objects.
    """

    model: KernelModel
    start: Any
    n: int
    predicate: BatchPredicate
    copies: int = 1


def _run_chunk(args: tuple[PathJob, int, np.random.SeedSequence]) -> np.ndarray:
    job, size, stream = args
    rng = np.random.default_rng(stream)
    paths = sample_paths(job.model, job.start, job.n, size * job.copies, rng)
    if job.copies > 1:
        paths = paths.reshape(size, job.copies, job.n, job.model.dim)
    mask = np.asarray(job.predicate(paths), dtype=bool)
    return np.count_nonzero(mask, axis=0)


def count_grid(
    model: KernelModel,
    n: int,
    predicate: BatchPredicate,
    samples: int,
    seed: int | np.random.SeedSequence,
    workers: int = 1,
    start: State = X_INIT,
    copies: int = 1,
    chunk_size: int | None = None,
) -> np.ndarray:
    """Hit counts per predicate column over `samples` draws of length-n paths.

    Chunk c always draws from the c-th spawned substream, so counts do not
    depend on the number of workers.
    """
    sizes = chunk_sizes(samples, chunk_size)
    job = PathJob(model=model, start=start, n=n, predicate=predicate, copies=copies)
    tasks = list(zip([job] * len(sizes), sizes, chunk_streams(seed, len(sizes))))
    if workers > 1 and len(tasks) > 1:
        with Pool(processes=min(workers, len(tasks))) as pool:
            counts = pool.map(_run_chunk, tasks)
    else:
        counts = [_run_chunk(t) for t in tasks]
    return np.sum(counts, axis=0)


def count_hits(
    model: KernelModel,
    n: int,
    predicate: BatchPredicate,
    samples: int,
    seed: int | np.random.SeedSequence,
    workers: int = 1,
    start: State = X_INIT,
    copies: int = 1,
) -> int:
    hits = int(count_grid(model, n, predicate, samples, seed, workers=workers, start=start, copies=copies))
    logger.debug("hits: n=%s copies=%s hits=%s/%s", n, copies, hits, samples)
    return hits


def estimate_probability(
    model: KernelModel,
    n: int,
    predicate: BatchPredicate,
    samples: int,
    seed: int | np.random.SeedSequence,
    workers: int = 1,
    start: State = X_INIT,
    copies: int = 1,
) -> tuple[int, float, float, float]:
    """(hits, p_hat, ci_low, ci_high) for the event described by the predicate."""
    hits = count_hits(model, n, predicate, samples, seed, workers=workers, start=start, copies=copies)
    lo, hi = clopper_pearson(hits, samples)
    return hits, hits / samples, lo, hi
