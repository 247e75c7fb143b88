"""Counter-based random numbers for reproducible parallel Monte Carlo.

Every value is a pure function of (seed, stream, shot, position): shots can be
sampled one at a time or in arbitrary batches, in any order, on any number of
threads, and always come out bit-identical.  The block function is
Philox4x64-10 (verified word-for-word against ``numpy.random.Philox``);
normal variates come from the inverse CDF so consumption per value is fixed.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

# Philox4x64 multipliers and Weyl key increments.
_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)

# Stream labels keep independent draw counters from ever colliding.
STREAM_STATIC = 0
STREAM_OU = 1
STREAM_PULSE = 2
STREAM_PHOTON = 3


def _mulhilo(a, b):
    """64x64 -> 128 bit product as (high, low) uint64 words."""
    lo = a * b
    a_lo = a & _MASK32
    a_hi = a >> _SHIFT32
    b_lo = b & _MASK32
    b_hi = b >> _SHIFT32
    t = a_lo * b_lo
    mid = a_lo * b_hi + (a_hi * b_lo & _MASK32) + (t >> _SHIFT32)
    hi = a_hi * b_hi + (a_hi * b_lo >> _SHIFT32) + (mid >> _SHIFT32)
    return hi, lo


def philox4x64(c0, c1, c2, c3, k0, k1):
    """10-round Philox4x64 block function on uint64 arrays.

    Returns the four output words for each input counter; all arguments
    broadcast.  Matches ``numpy.random.Philox`` evaluated at the same raw
    counter words.
    """
    with np.errstate(over="ignore"):
        for _ in range(10):
            hi0, lo0 = _mulhilo(_M0, c0)
            hi1, lo1 = _mulhilo(_M1, c2)
            c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
            k0 = k0 + _W0
            k1 = k1 + _W1
    return c0, c1, c2, c3


def _as_uint64(x):
    return np.uint64(int(x) & 0xFFFFFFFFFFFFFFFF)


def _raw64_numpy(seed, stream, shots, start, count):
    b0 = start // 4
    b1 = (start + count - 1) // 4 + 1
    nblk = b1 - b0
    blocks = np.arange(b0, b1, dtype=np.uint64)
    c0 = np.broadcast_to(blocks, (shots.size, nblk)).ravel()
    c1 = np.broadcast_to(shots[:, None], (shots.size, nblk)).ravel()
    c2 = np.full(shots.size * nblk, _as_uint64(stream))
    c3 = np.zeros(shots.size * nblk, dtype=np.uint64)
    w0, w1, w2, w3 = philox4x64(c0, c1, c2, c3, _as_uint64(seed), np.uint64(0))
    out = np.stack([w0, w1, w2, w3], axis=-1).reshape(shots.size, 4 * nblk)
    lo = start - 4 * b0
    return out[:, lo:lo + count]


try:  # compiled kernel; the numpy path stays as reference and fallback
    import numba as _nb

    @_nb.njit(cache=True)
    def _raw64_kernel(seed, stream, shots, start, count, out):  # pragma: no cover
        b0 = start // 4
        nblk = (start + count - 1) // 4 + 1 - b0
        off = start - 4 * b0
        mask32 = np.uint64(0xFFFFFFFF)
        for s in range(shots.size):
            for bi in range(nblk):
                c0 = np.uint64(b0 + bi)
                c1 = shots[s]
                c2 = stream
                c3 = np.uint64(0)
                k0 = seed
                k1 = np.uint64(0)
                for _ in range(10):
                    lo0 = _M0 * c0
                    a_hi = _M0 >> np.uint64(32)
                    b_lo = c0 & mask32
                    b_hi = c0 >> np.uint64(32)
                    t = (_M0 & mask32) * b_lo
                    mid = (_M0 & mask32) * b_hi + (a_hi * b_lo & mask32) + (t >> np.uint64(32))
                    hi0 = a_hi * b_hi + (a_hi * b_lo >> np.uint64(32)) + (mid >> np.uint64(32))
                    lo1 = _M1 * c2
                    a_hi = _M1 >> np.uint64(32)
                    b_lo = c2 & mask32
                    b_hi = c2 >> np.uint64(32)
                    t = (_M1 & mask32) * b_lo
                    mid = (_M1 & mask32) * b_hi + (a_hi * b_lo & mask32) + (t >> np.uint64(32))
                    hi1 = a_hi * b_hi + (a_hi * b_lo >> np.uint64(32)) + (mid >> np.uint64(32))
                    c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
                    k0 = k0 + _W0
                    k1 = k1 + _W1
                for w in range(4):
                    idx = bi * 4 + w - off
                    if 0 <= idx < count:
                        if w == 0:
                            out[s, idx] = c0
                        elif w == 1:
                            out[s, idx] = c1
                        elif w == 2:
                            out[s, idx] = c2
                        else:
                            out[s, idx] = c3

    def _raw64_numba(seed, stream, shots, start, count):
        out = np.empty((shots.size, count), dtype=np.uint64)
        _raw64_kernel(_as_uint64(seed), _as_uint64(stream), shots,
                      np.int64(start), np.int64(count), out)
        return out

    _raw64_impl = _raw64_numba
except ImportError:  # pragma: no cover
    _raw64_impl = _raw64_numpy


def raw64(seed, stream, shots, start, count):
    """uint64 values at positions [start, start+count) of each shot's stream.

    shots is an integer array of shot indices; returns shape (len(shots), count).
    Counter layout: (block index, shot, stream, 0), key = (seed, 0).
    """
    shots = np.atleast_1d(np.asarray(shots)).astype(np.uint64)
    if count <= 0:
        return np.empty((shots.size, 0), dtype=np.uint64)
    return _raw64_impl(seed, stream, shots, start, count)


def uniforms(seed, stream, shots, start, count):
    """Doubles in the open interval (0, 1) with 53-bit resolution."""
    x = raw64(seed, stream, shots, start, count)
    return ((x >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def normals(seed, stream, shots, start, count):
    """Standard normal variates via the inverse CDF (one word per value)."""
    return ndtri(uniforms(seed, stream, shots, start, count))


class CounterStream:
    """Sequential reader over one stream of the counter RNG.

    Tracks the position so callers can draw values in program order without
    bookkeeping; two streams with the same (seed, stream, shots) and the same
    draw sequence produce identical values regardless of batching.
    """

    def __init__(self, seed, stream, shots):
        self.seed = seed
        self.stream = stream
        self.shots = np.atleast_1d(np.asarray(shots)).astype(np.uint64)
        self.pos = 0

    def normals(self, count):
        out = normals(self.seed, self.stream, self.shots, self.pos, count)
        self.pos += count
        return out

    def uniforms(self, count):
        out = uniforms(self.seed, self.stream, self.shots, self.pos, count)
        self.pos += count
        return out
