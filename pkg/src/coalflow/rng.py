"""Keyed counter-based random streams.

Every draw is a pure function of ``(master_seed, replicate_id, substream_id)``
plus a counter, so replicates can be generated in any order or in parallel and
still come out bit-identical. The block cipher is Philox4x64-10; Gaussians are
produced with a Box-Muller transform applied inside each counter block, so no
state ever carries over between blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from numpy.typing import NDArray

_MASK32 = np.uint64(0xFFFFFFFF)
_SH32 = np.uint64(32)
_SH11 = np.uint64(11)
_PHILOX_M0 = np.uint64(0xD2E7470EE14C6C93)
_PHILOX_M1 = np.uint64(0xCA5A826395121157)
_PHILOX_W0 = np.uint64(0x9E3779B97F4A7C15)
_PHILOX_W1 = np.uint64(0xBB67AE8584CAA73B)
_TWO_M53 = 1.0 / 9007199254740992.0
_TWO_PI = 2.0 * math.pi

# counter word 2 separates independent uses of one key
PURPOSE_INCREMENT = 0
PURPOSE_BRIDGE = 1
PURPOSE_STREAM = 2


@njit(cache=True, inline="always")
def _mulhilo(a, b):
    a_lo = a & _MASK32
    a_hi = a >> _SH32
    b_lo = b & _MASK32
    b_hi = b >> _SH32
    lo_lo = a_lo * b_lo
    hi_lo = a_hi * b_lo
    lo_hi = a_lo * b_hi
    hi_hi = a_hi * b_hi
    cross = (lo_lo >> _SH32) + (hi_lo & _MASK32) + lo_hi
    hi = hi_hi + (hi_lo >> _SH32) + (cross >> _SH32)
    return hi, a * b


@njit(cache=True)
def philox4x64(c0, c1, c2, c3, k0, k1):
    """Philox4x64 with 10 rounds on one 256-bit counter block."""
    for _ in range(10):
        hi0, lo0 = _mulhilo(_PHILOX_M0, c0)
        hi1, lo1 = _mulhilo(_PHILOX_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = k0 + _PHILOX_W0
        k1 = k1 + _PHILOX_W1
    return c0, c1, c2, c3


@njit(cache=True, inline="always")
def _unit_open(r):
    # (0, 1]: safe under log
    return (np.float64(r >> _SH11) + 1.0) * _TWO_M53


@njit(cache=True, inline="always")
def _unit_halfopen(r):
    # [0, 1)
    return np.float64(r >> _SH11) * _TWO_M53


@njit(cache=True)
def normal_block(k0, k1, block, step, purpose):
    """Four standard normals from one counter block."""
    r0, r1, r2, r3 = philox4x64(np.uint64(block), np.uint64(step), np.uint64(purpose),
                                np.uint64(0), k0, k1)
    rad = math.sqrt(-2.0 * math.log(_unit_open(r0)))
    ang = _TWO_PI * _unit_halfopen(r1)
    rad2 = math.sqrt(-2.0 * math.log(_unit_open(r2)))
    ang2 = _TWO_PI * _unit_halfopen(r3)
    return rad * math.cos(ang), rad * math.sin(ang), rad2 * math.cos(ang2), rad2 * math.sin(ang2)


@njit(cache=True)
def uniform_block(k0, k1, block, step, purpose):
    """Four uniforms on [0, 1) from one counter block."""
    r0, r1, r2, r3 = philox4x64(np.uint64(block), np.uint64(step), np.uint64(purpose),
                                np.uint64(0), k0, k1)
    return _unit_halfopen(r0), _unit_halfopen(r1), _unit_halfopen(r2), _unit_halfopen(r3)


@njit(cache=True)
def fill_normals(out, n, k0, k1, step, purpose, first_block):
    """Write ``n`` normals from consecutive blocks starting at ``first_block``."""
    i = 0
    block = first_block
    while i < n:
        z0, z1, z2, z3 = normal_block(k0, k1, block, step, purpose)
        out[i] = z0
        if i + 1 < n:
            out[i + 1] = z1
        if i + 2 < n:
            out[i + 2] = z2
        if i + 3 < n:
            out[i + 3] = z3
        i += 4
        block += 1


@njit(cache=True)
def fill_uniforms(out, n, k0, k1, step, purpose, first_block):
    i = 0
    block = first_block
    while i < n:
        u0, u1, u2, u3 = uniform_block(k0, k1, block, step, purpose)
        out[i] = u0
        if i + 1 < n:
            out[i + 1] = u1
        if i + 2 < n:
            out[i + 2] = u2
        if i + 3 < n:
            out[i + 3] = u3
        i += 4
        block += 1


@dataclass(frozen=True)
class StreamKey:
    master_seed: int
    replicate_id: int = 0
    substream_id: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2**64:
            raise ValueError(f"master_seed must fit in 64 bits, got {self.master_seed}")
        if not 0 <= self.replicate_id < 2**40:
            raise ValueError(f"replicate_id out of range: {self.replicate_id}")
        if not 0 <= self.substream_id < 2**24:
            raise ValueError(f"substream_id out of range: {self.substream_id}")

    def words(self) -> tuple[np.uint64, np.uint64]:
        """The two 64-bit Philox key words."""
        return np.uint64(self.master_seed), np.uint64((self.replicate_id << 24) | self.substream_id)


def key_words(seed: int, replicate_id: int, substream_id: int = 0) -> tuple[np.uint64, np.uint64]:
    return StreamKey(seed, replicate_id, substream_id).words()


class GaussianStream:
    """Sequential view of one keyed stream of standard normal deviates.

    The sequence is addressed by block, so ``take`` calls can be split any way
    and still concatenate to the same deviates.
    """

    def __init__(self, key: StreamKey):
        self.key = key
        self._k0, self._k1 = key.words()
        self._pos = 0

    def take(self, n: int) -> NDArray[np.float64]:
        start = self._pos
        first_block, offset = divmod(start, 4)
        buf = np.empty(n + offset, dtype=np.float64)
        fill_normals(buf, n + offset, self._k0, self._k1, 0, PURPOSE_STREAM, first_block)
        self._pos += n
        return buf[offset:]

    def __iter__(self):
        while True:
            yield from self.take(1024)


def gaussian_stream(key: StreamKey) -> GaussianStream:
    return GaussianStream(key)
