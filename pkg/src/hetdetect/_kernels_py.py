"""Numpy implementation of the hot kernels.

Semantics are identical to ``_ckernels``; values agree to floating-point
roundoff (reductions may sum in a different order).

Every random draw is a pure function of ``(seed, stream, replicate, index)``
through Philox4x32-10: the counter is ``(index, rep_lo, rep_hi, stream)`` and
the key is ``(seed_lo, seed_hi)``. The first two output words give a 52-bit
uniform on the open interval (0, 1); normals come from the inverse CDF.
"""

import numpy as np
from scipy.special import ndtri

BACKEND = "python"

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)
_ROUNDS = 10


def _philox_arrays(c0, c1, c2, c3, k0, k1):
    """Philox4x32-10 on uint64 arrays holding 32-bit words (broadcasting)."""
    for r in range(_ROUNDS):
        if r:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (
            (p1 >> _SHIFT32) ^ c1 ^ np.uint64(k0),
            p1 & _MASK32,
            (p0 >> _SHIFT32) ^ c3 ^ np.uint64(k1),
            p0 & _MASK32,
        )
    return c0, c1, c2, c3


def philox4x32(counter, key):
    """Scalar Philox4x32-10 block: 4 counter words, 2 key words -> 4 words."""
    c = [np.uint64(int(w) & 0xFFFFFFFF) for w in counter]
    k0, k1 = (int(w) & 0xFFFFFFFF for w in key)
    out = _philox_arrays(c[0], c[1], c[2], c[3], k0, k1)
    return tuple(int(w) for w in out)


def _counter_words(seed, stream, rep0, nrep, ncol):
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be in [0, 2**64)")
    reps = np.arange(rep0, rep0 + nrep, dtype=np.uint64)[:, None]
    cols = np.arange(1, ncol + 1, dtype=np.uint64)[None, :]
    c0 = np.broadcast_to(cols, (nrep, ncol))
    c1 = np.broadcast_to(reps & _MASK32, (nrep, ncol))
    c2 = np.broadcast_to(reps >> _SHIFT32, (nrep, ncol))
    c3 = np.uint64(stream & 0xFFFFFFFF)
    return _philox_arrays(c0, c1, c2, c3, seed & 0xFFFFFFFF, seed >> 32)


def uniform_block(seed, stream, rep0, nrep, ncol):
    """Uniforms on (0, 1), shape (nrep, ncol); column j-1 is index j."""
    w0, w1, _, _ = _counter_words(seed, stream, rep0, nrep, ncol)
    bits = (w0 << np.uint64(20)) | (w1 >> np.uint64(12))
    return (bits.astype(np.float64) + 0.5) * 2.0**-52


def normal_block(seed, stream, rep0, nrep, ncol):
    """Standard normals, shape (nrep, ncol)."""
    return ndtri(uniform_block(seed, stream, rep0, nrep, ncol))


def sumsq_block(seed, stream, rep0, nrep, mean, scale):
    """Per replicate: sum_j (mean_j + scale_j * eps_j)^2 over j = 1..len(mean)."""
    mean = np.asarray(mean, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    y = mean + scale * normal_block(seed, stream, rep0, nrep, mean.shape[0])
    return np.einsum("ij,ij->i", y, y)


def _strict_ceil_sqrt(d):
    # floor(sqrt(d)) + 1, exact for integers
    r = int(np.sqrt(d))
    while r * r > d:
        r -= 1
    while (r + 1) * (r + 1) <= d:
        r += 1
    return r + 1


def block_log_max(prefix_sq, k, n):
    """max_{0<=l<=n-k} (P[l+k]-P[l]) * ln(1 + x v sqrt(x)), x = (n-l)/k^2."""
    prefix_sq = np.asarray(prefix_sq, dtype=np.float64)
    l = np.arange(0, n - k + 1)
    blocks = prefix_sq[l + k] - prefix_sq[l]
    x = (n - l) / float(k * k)
    return float(np.max(blocks * np.log1p(np.maximum(x, np.sqrt(x)))))


def sparse_rate_scan(prefix_sq, prefix_4th, nmax):
    """rho^2_{ceil(sqrt D), D} for D = 0..nmax from prefix sums of sorted sigma^2, sigma^4.

    Entries for D < 2 are NaN (the strict ceiling leaves no admissible k).
    """
    prefix_sq = np.asarray(prefix_sq, dtype=np.float64)
    prefix_4th = np.asarray(prefix_4th, dtype=np.float64)
    out = np.full(nmax + 1, np.nan)
    for d in range(2, nmax + 1):
        k = _strict_ceil_sqrt(d)
        tail = np.sqrt(prefix_4th[d] - prefix_4th[d - k])
        out[d] = max(block_log_max(prefix_sq, k, d), tail)
    return out
