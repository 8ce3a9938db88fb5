# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. See ``_kernels_py`` for the reference semantics."""

import numpy as np

from libc.math cimport log1p, sqrt
from libc.stdint cimport uint32_t, uint64_t
from scipy.special.cython_special cimport ndtri

BACKEND = "cython"

cdef enum:
    ROUNDS = 10


cdef inline void _philox(uint32_t* c, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t c0 = c[0], c1 = c[1], c2 = c[2], c3 = c[3]
    cdef int r
    for r in range(ROUNDS):
        if r:
            k0 = k0 + <uint32_t>0x9E3779B9
            k1 = k1 + <uint32_t>0xBB67AE85
        p0 = <uint64_t>0xD2511F53 * c0
        p1 = <uint64_t>0xCD9E8D57 * c2
        c0, c1, c2, c3 = (<uint32_t>(p1 >> 32)) ^ c1 ^ k0, <uint32_t>p1, \
                         (<uint32_t>(p0 >> 32)) ^ c3 ^ k1, <uint32_t>p0
    c[0] = c0
    c[1] = c1
    c[2] = c2
    c[3] = c3


cdef inline double _uniform(uint64_t seed, uint32_t stream, uint64_t rep,
                            uint32_t j) noexcept nogil:
    cdef uint32_t c[4]
    cdef uint64_t bits
    c[0] = j
    c[1] = <uint32_t>rep
    c[2] = <uint32_t>(rep >> 32)
    c[3] = stream
    _philox(c, <uint32_t>seed, <uint32_t>(seed >> 32))
    bits = ((<uint64_t>c[0]) << 20) | ((<uint64_t>c[1]) >> 12)
    return (<double>bits + 0.5) * 2.220446049250313e-16


def _check_seed(seed):
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must be in [0, 2**64)")


def philox4x32(counter, key):
    cdef uint32_t c[4]
    cdef int i
    for i in range(4):
        c[i] = <uint32_t>(int(counter[i]) & 0xFFFFFFFF)
    _philox(c, <uint32_t>(int(key[0]) & 0xFFFFFFFF),
            <uint32_t>(int(key[1]) & 0xFFFFFFFF))
    return (int(c[0]), int(c[1]), int(c[2]), int(c[3]))


def uniform_block(seed, stream, rep0, Py_ssize_t nrep, Py_ssize_t ncol):
    _check_seed(seed)
    out = np.empty((nrep, ncol), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef uint64_t s = seed, r0 = rep0
    cdef uint32_t st = stream & 0xFFFFFFFF
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(nrep):
            for j in range(ncol):
                o[i, j] = _uniform(s, st, r0 + i, <uint32_t>(j + 1))
    return out


def normal_block(seed, stream, rep0, Py_ssize_t nrep, Py_ssize_t ncol):
    _check_seed(seed)
    out = np.empty((nrep, ncol), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef uint64_t s = seed, r0 = rep0
    cdef uint32_t st = stream & 0xFFFFFFFF
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(nrep):
            for j in range(ncol):
                o[i, j] = ndtri(_uniform(s, st, r0 + i, <uint32_t>(j + 1)))
    return out


def sumsq_block(seed, stream, rep0, Py_ssize_t nrep, mean, scale):
    _check_seed(seed)
    cdef const double[::1] m = np.ascontiguousarray(mean, dtype=np.float64)
    cdef const double[::1] sc = np.ascontiguousarray(scale, dtype=np.float64)
    if m.shape[0] != sc.shape[0]:
        raise ValueError("mean and scale must have the same length")
    out = np.empty(nrep, dtype=np.float64)
    cdef double[::1] o = out
    cdef uint64_t s = seed, r0 = rep0
    cdef uint32_t st = stream & 0xFFFFFFFF
    cdef Py_ssize_t i, j, n = m.shape[0]
    cdef double acc, y
    with nogil:
        for i in range(nrep):
            acc = 0.0
            for j in range(n):
                y = m[j] + sc[j] * ndtri(_uniform(s, st, r0 + i, <uint32_t>(j + 1)))
                acc += y * y
            o[i] = acc
    return out


cdef inline Py_ssize_t _strict_ceil_sqrt(Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t r = <Py_ssize_t>sqrt(<double>d)
    while r * r > d:
        r -= 1
    while (r + 1) * (r + 1) <= d:
        r += 1
    return r + 1


cdef double _block_log_max(const double[::1] p, Py_ssize_t k, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t l
    cdef double best = -1.0, x, v, kk = <double>(k * k)
    for l in range(n - k + 1):
        x = (n - l) / kk
        v = (p[l + k] - p[l]) * log1p(x if x > sqrt(x) else sqrt(x))
        if v > best:
            best = v
    return best


def block_log_max(prefix_sq, Py_ssize_t k, Py_ssize_t n):
    cdef const double[::1] p = np.ascontiguousarray(prefix_sq, dtype=np.float64)
    if k < 1 or k > n or n >= p.shape[0]:
        raise ValueError("need 1 <= k <= n < len(prefix_sq)")
    return _block_log_max(p, k, n)


def sparse_rate_scan(prefix_sq, prefix_4th, Py_ssize_t nmax):
    cdef const double[::1] p2 = np.ascontiguousarray(prefix_sq, dtype=np.float64)
    cdef const double[::1] p4 = np.ascontiguousarray(prefix_4th, dtype=np.float64)
    if nmax >= p2.shape[0] or nmax >= p4.shape[0]:
        raise ValueError("prefix arrays too short for nmax")
    out = np.full(nmax + 1, np.nan)
    cdef double[::1] o = out
    cdef Py_ssize_t d, k
    cdef double tail, blk
    with nogil:
        for d in range(2, nmax + 1):
            k = _strict_ceil_sqrt(d)
            tail = sqrt(p4[d] - p4[d - k])
            blk = _block_log_max(p2, k, d)
            o[d] = blk if blk > tail else tail
    return out
