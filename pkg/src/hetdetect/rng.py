"""Counter-based random draws and replicate-parallel execution.

A draw is addressed by ``(seed, stream, replicate, index)``; nothing depends
on evaluation order, so results are identical for any chunking or number of
worker threads. Streams separate independent uses of one seed.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._backend import kernels

#: observation noise eps_j
STREAM_NOISE = 0
#: Monte Carlo null draws for quantiles
STREAM_QUANTILE = 1
#: subset selection for sparse priors
STREAM_PRIOR_SUBSET = 2
#: Rademacher signs for priors
STREAM_PRIOR_SIGN = 3

CHUNK = 8192


def normals(seed, stream, rep0, nrep, ncol):
    """Standard normal block; row r is replicate rep0 + r, column j-1 is index j."""
    return kernels.normal_block(int(seed), int(stream), int(rep0), int(nrep), int(ncol))


def uniforms(seed, stream, rep0, nrep, ncol):
    return kernels.uniform_block(int(seed), int(stream), int(rep0), int(nrep), int(ncol))


def sumsq(seed, stream, rep0, nrep, mean, scale):
    """Per-replicate sum of (mean_j + scale_j * eps_j)^2 without materialising eps."""
    return kernels.sumsq_block(int(seed), int(stream), int(rep0), int(nrep), mean, scale)


def replicate_map(func, nrep, workers=1, chunk=CHUNK):
    """Evaluate ``func(rep0, count)`` over fixed chunks of ``range(nrep)``.

    Chunk boundaries do not depend on ``workers`` and results are concatenated
    in replicate order, so the output is the same for any worker count.
    """
    if nrep < 0:
        raise ValueError("nrep must be nonnegative")
    spans = [(r0, min(chunk, nrep - r0)) for r0 in range(0, nrep, chunk)]
    if not spans:
        return np.empty(0)
    if workers <= 1 or len(spans) == 1:
        parts = [func(r0, count) for r0, count in spans]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda s: func(*s), spans))
    return np.concatenate(parts)
