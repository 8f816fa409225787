"""Pure-Python/numpy implementation of the hot kernels.

This is the fallback used when the compiled extension is unavailable.  Both
backends must produce bit-identical results: every random draw is a pure
function of 64-bit integer inputs run through the same splitmix64-style
mixing chain, and every probability threshold is an IEEE double computed
once by the caller.  Keep any change here in lockstep with _kernels_c.pyx.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# numpy copies of the constants so array ops stay in uint64 throughout
_NP_GOLDEN = np.uint64(_GOLDEN)
_NP_MIX1 = np.uint64(_MIX1)
_NP_MIX2 = np.uint64(_MIX2)
_U53 = 2.0**-53


def _fin(z: int) -> int:
    """splitmix64 output function (with the golden increment folded in)."""
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def derive(key: int, *fields: int) -> int:
    """Chain h -> fin(h ^ field*golden) over the fields; injective in the last field."""
    h = int(key) & _MASK
    for f in fields:
        h = _fin(h ^ ((int(f) * _GOLDEN) & _MASK))
    return h


def u01(h: int) -> float:
    """Map a 64-bit hash to a double in [0, 1) using the top 53 bits."""
    return (h >> 11) * _U53


def _fin_vec(z: np.ndarray) -> np.ndarray:
    z = z + _NP_GOLDEN
    z = (z ^ (z >> np.uint64(30))) * _NP_MIX1
    z = (z ^ (z >> np.uint64(27))) * _NP_MIX2
    return z ^ (z >> np.uint64(31))


def _u01_vec(h: np.ndarray) -> np.ndarray:
    return (h >> np.uint64(11)).astype(np.float64) * _U53


def materialize_bits(seed, stations, b, gammas, probs, length):
    """Realize transmission bits for the given stations.

    gammas[s] is the exclusive end of stage s (gammas[0] == 0), probs is the
    (stage, channel) Bernoulli table, and the bit at (u, beta, j) is
    u01(derive(seed, u, beta, j)) < probs[stage(j)-1, beta-1].
    Returns uint8 array of shape (len(stations), b, length).
    """
    gammas = np.asarray(gammas, dtype=np.int64)
    probs = np.asarray(probs, dtype=np.float64)
    if length > gammas[-1]:
        raise ValueError("length exceeds the last stage boundary")
    positions = np.arange(length, dtype=np.uint64)
    stage_ix = np.searchsorted(gammas[1:], np.arange(length, dtype=np.int64), side="right")
    out = np.empty((len(stations), b, length), dtype=np.uint8)
    for si, u in enumerate(stations):
        hu = _fin((seed & _MASK) ^ ((u * _GOLDEN) & _MASK))
        for beta in range(1, b + 1):
            hb = np.uint64(_fin(hu ^ ((beta * _GOLDEN) & _MASK)))
            h = _fin_vec(hb ^ (positions * _NP_GOLDEN))
            out[si, beta - 1] = _u01_vec(h) < probs[stage_ix, beta - 1]
    return out


def screening_round(keys, ids, t, probs):
    """One screening round: per-channel transmitter counts and lone senders.

    keys[i] is the per-station stream key; the draw for (station i, round t,
    channel beta) is u01(derive(keys[i], t, beta)).  Returns (counts, lone)
    int64 arrays of length b; lone[beta-1] is the transmitting station id
    when counts[beta-1] == 1, else 0.
    """
    keys = np.asarray(keys, dtype=np.uint64)
    ids = np.asarray(ids, dtype=np.int64)
    b = len(probs)
    counts = np.zeros(b, dtype=np.int64)
    lone = np.zeros(b, dtype=np.int64)
    ht = _fin_vec(keys ^ np.uint64((int(t) * _GOLDEN) & _MASK))
    for beta in range(1, b + 1):
        hb = _fin_vec(ht ^ np.uint64((beta * _GOLDEN) & _MASK))
        sent = _u01_vec(hb) < probs[beta - 1]
        c = int(sent.sum())
        counts[beta - 1] = c
        if c == 1:
            lone[beta - 1] = ids[sent.argmax()]
    return counts, lone


def array_round(bits, sigmas, ids, t):
    """Per-channel transmitter counts/lone senders for one array-protocol round.

    bits has shape (stations, b, length); station i transmits on beta at
    global time t iff 0 <= t - sigmas[i] < length and the bit is set.
    """
    b = bits.shape[1]
    length = bits.shape[2]
    counts = np.zeros(b, dtype=np.int64)
    lone = np.zeros(b, dtype=np.int64)
    pos = t - np.asarray(sigmas, dtype=np.int64)
    valid = (pos >= 0) & (pos < length)
    if not valid.any():
        return counts, lone
    cols = bits[valid, :, :][np.arange(int(valid.sum())), :, pos[valid]]
    counts[:] = cols.sum(axis=0)
    if (counts == 1).any():
        vids = np.asarray(ids, dtype=np.int64)[valid]
        for ci in np.nonzero(counts == 1)[0]:
            lone[ci] = vids[cols[:, ci].argmax()]
    return counts, lone


def jam_mask(jam_key, t, b, p):
    """Bitmask of jammed channels at time t; bit (beta-1) set iff jammed."""
    if p <= 0.0:
        return 0
    ht = _fin((jam_key & _MASK) ^ ((t * _GOLDEN) & _MASK))
    mask = 0
    for beta in range(1, b + 1):
        if u01(_fin(ht ^ ((beta * _GOLDEN) & _MASK))) < p:
            mask |= 1 << (beta - 1)
    return mask


def first_isolated(masks, subset_mask, t_hi):
    """Earliest time t <= t_hi where some channel has exactly one transmitter.

    masks[t, beta-1] is the bitmask of stations with a set bit at (beta, t);
    restricting to subset_mask, a power of two means an isolated position.
    Returns -1 when no such time exists.
    """
    limit = min(int(t_hi), masks.shape[0] - 1)
    b = masks.shape[1]
    for t in range(limit + 1):
        for ci in range(b):
            m = int(masks[t, ci]) & subset_mask
            if m and (m & (m - 1)) == 0:
                return t
    return -1
