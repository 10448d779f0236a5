"""Pinned, portable pseudo-random streams.

Every random choice in the package (keys, channel flips, reserved positions,
punctured values, conversion subsets) is drawn from SplitMix64 used as a
counter-based generator: output ``i`` of a stream with state ``s`` is
``mix64(s + (i + 1) * GAMMA)`` with wrapping 64-bit arithmetic.  This is the
reference SplitMix64 sequence, so any language can reproduce a transcript
from the seed alone.

Test vectors (seed 0): ``0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4,
0x06C45D188009454F``.

Derived values:

* uniform double: ``(u >> 11) * 2**-53``
* random bit: ``u >> 63``
* ``k`` of ``N`` positions without replacement: the indices of the ``k``
  smallest draws among ``N`` (stable ordering on ties), returned sorted.
"""

from __future__ import annotations

import struct

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def _label_bits(label) -> int:
    if isinstance(label, float):
        return struct.unpack("<Q", struct.pack("<d", label))[0]
    if isinstance(label, str):
        h = 0
        for byte in label.encode("utf-8"):
            h = mix64(h ^ byte)
        return h
    return int(label) & MASK64


def derive_seed(master: int, *labels) -> int:
    """Derive an independent 64-bit seed from ``master`` and a label path.

    Labels may be ints, floats (hashed by their IEEE-754 bits) or strings.
    The result depends only on the labels, never on call order elsewhere,
    which keeps per-trial streams identical between serial and parallel runs.
    """
    h = mix64(int(master) & MASK64)
    for label in labels:
        h = mix64(h ^ mix64((_label_bits(label) + GAMMA) & MASK64))
    return h


class SplitMix64:
    """Counter-based SplitMix64 stream with vectorized draws."""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self, size: int) -> np.ndarray:
        size = int(size)
        counters = np.arange(1, size + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + counters * np.uint64(GAMMA)
            out = _mix64_array(z)
        self.state = (self.state + size * GAMMA) & MASK64
        return out

    def uniform(self, size: int) -> np.ndarray:
        return (self.next_u64(size) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def bits(self, size: int) -> np.ndarray:
        return (self.next_u64(size) >> np.uint64(63)).astype(np.uint8)

    def choose(self, population: int, k: int) -> np.ndarray:
        """Sorted indices of a uniform ``k``-subset of ``range(population)``."""
        if not 0 <= k <= population:
            raise ValueError(f"cannot choose {k} of {population}")
        keys = self.next_u64(population)
        order = np.argsort(keys, kind="stable")
        return np.sort(order[:k]).astype(np.int64)
