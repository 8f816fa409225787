# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementation of the hot kernels.

Must stay bit-identical to _kernels_py.py: same splitmix64-style chain, same
draw ordering, same double thresholds.  See that module for the contract.
"""

import numpy as np

from libc.stdint cimport uint64_t, int64_t, uint8_t

BACKEND = "cython"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t MIX1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t MIX2 = 0x94D049BB133111EBULL
cdef double U53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _fin(uint64_t z) nogil:
    z = z + GOLDEN
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


cdef inline double _u01(uint64_t h) nogil:
    return <double>(h >> 11) * U53


def derive(key, *fields):
    """Chain h -> fin(h ^ field*golden) over the fields; matches the pure version."""
    cdef uint64_t h = <uint64_t>(int(key) & 0xFFFFFFFFFFFFFFFF)
    for f in fields:
        h = _fin(h ^ (<uint64_t>(int(f) & 0xFFFFFFFFFFFFFFFF) * GOLDEN))
    return int(h)


def u01(h):
    """Top-53-bit mapping of a 64-bit hash to [0, 1)."""
    return _u01(<uint64_t>(int(h) & 0xFFFFFFFFFFFFFFFF))


def materialize_bits(seed, stations, b, gammas, probs, length):
    """Realize transmission bits; see _kernels_py.materialize_bits."""
    cdef int64_t[::1] st = np.ascontiguousarray(stations, dtype=np.int64)
    cdef int64_t[::1] g = np.ascontiguousarray(gammas, dtype=np.int64)
    if length > g[g.shape[0] - 1]:
        raise ValueError("length exceeds the last stage boundary")
    cdef double[:, ::1] pr = np.ascontiguousarray(probs, dtype=np.float64)
    cdef Py_ssize_t n_st = st.shape[0]
    cdef Py_ssize_t nb = b
    cdef Py_ssize_t L = length
    out_arr = np.empty((n_st, nb, L), dtype=np.uint8)
    cdef uint8_t[:, :, ::1] out = out_arr
    cdef uint64_t sd = <uint64_t>(seed & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t hu, hb
    cdef Py_ssize_t si, ci, j
    cdef Py_ssize_t stage
    cdef double p
    with nogil:
        for si in range(n_st):
            hu = _fin(sd ^ (<uint64_t>st[si] * GOLDEN))
            for ci in range(nb):
                hb = _fin(hu ^ (<uint64_t>(ci + 1) * GOLDEN))
                stage = 1
                for j in range(L):
                    while j >= g[stage]:
                        stage += 1
                    p = pr[stage - 1, ci]
                    out[si, ci, j] = 1 if _u01(_fin(hb ^ (<uint64_t>j * GOLDEN))) < p else 0
    return out_arr


def screening_round(keys, ids, t, probs):
    """One screening round; see _kernels_py.screening_round."""
    cdef uint64_t[::1] ks = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef int64_t[::1] sid = np.ascontiguousarray(ids, dtype=np.int64)
    cdef double[::1] pr = np.ascontiguousarray(probs, dtype=np.float64)
    cdef Py_ssize_t w = ks.shape[0]
    cdef Py_ssize_t nb = pr.shape[0]
    counts_arr = np.zeros(nb, dtype=np.int64)
    lone_arr = np.zeros(nb, dtype=np.int64)
    cdef int64_t[::1] counts = counts_arr
    cdef int64_t[::1] lone = lone_arr
    cdef uint64_t tt = <uint64_t>t
    cdef uint64_t ht
    cdef Py_ssize_t i, ci
    with nogil:
        for i in range(w):
            ht = _fin(ks[i] ^ (tt * GOLDEN))
            for ci in range(nb):
                if _u01(_fin(ht ^ (<uint64_t>(ci + 1) * GOLDEN))) < pr[ci]:
                    counts[ci] += 1
                    lone[ci] = sid[i]
        for ci in range(nb):
            if counts[ci] != 1:
                lone[ci] = 0
    return counts_arr, lone_arr


def array_round(bits, sigmas, ids, t):
    """Per-channel counts/lone senders for one array round; see _kernels_py."""
    cdef uint8_t[:, :, ::1] bt = np.ascontiguousarray(bits, dtype=np.uint8)
    cdef int64_t[::1] sg = np.ascontiguousarray(sigmas, dtype=np.int64)
    cdef int64_t[::1] sid = np.ascontiguousarray(ids, dtype=np.int64)
    cdef Py_ssize_t n_st = bt.shape[0]
    cdef Py_ssize_t nb = bt.shape[1]
    cdef Py_ssize_t L = bt.shape[2]
    counts_arr = np.zeros(nb, dtype=np.int64)
    lone_arr = np.zeros(nb, dtype=np.int64)
    cdef int64_t[::1] counts = counts_arr
    cdef int64_t[::1] lone = lone_arr
    cdef int64_t tt = t
    cdef int64_t pos
    cdef Py_ssize_t i, ci
    with nogil:
        for i in range(n_st):
            pos = tt - sg[i]
            if pos < 0 or pos >= L:
                continue
            for ci in range(nb):
                if bt[i, ci, pos]:
                    counts[ci] += 1
                    lone[ci] = sid[i]
        for ci in range(nb):
            if counts[ci] != 1:
                lone[ci] = 0
    return counts_arr, lone_arr


def jam_mask(jam_key, t, b, p):
    """Bitmask of jammed channels at time t; see _kernels_py.jam_mask."""
    cdef double pp = p
    if pp <= 0.0:
        return 0
    cdef uint64_t ht = _fin(<uint64_t>(jam_key & 0xFFFFFFFFFFFFFFFF) ^ (<uint64_t>t * GOLDEN))
    cdef int nb = b
    cdef int ci
    cdef uint64_t mask = 0
    for ci in range(nb):
        if _u01(_fin(ht ^ (<uint64_t>(ci + 1) * GOLDEN))) < pp:
            mask |= <uint64_t>1 << ci
    return int(mask)


def first_isolated(masks, subset_mask, t_hi):
    """Earliest isolated time for the subset; see _kernels_py.first_isolated."""
    cdef uint64_t[:, ::1] mk = np.ascontiguousarray(masks, dtype=np.uint64)
    cdef uint64_t sub = <uint64_t>(subset_mask & 0xFFFFFFFFFFFFFFFF)
    cdef Py_ssize_t limit = t_hi
    cdef Py_ssize_t T = mk.shape[0]
    cdef Py_ssize_t nb = mk.shape[1]
    if limit > T - 1:
        limit = T - 1
    cdef Py_ssize_t t, ci
    cdef Py_ssize_t found = -1
    cdef uint64_t m
    with nogil:
        for t in range(limit + 1):
            for ci in range(nb):
                m = mk[t, ci] & sub
                if m != 0 and (m & (m - 1)) == 0:
                    found = t
                    break
            if found >= 0:
                break
    return int(found)
