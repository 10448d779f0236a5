"""Seeded binary symmetric channel and correlated key pairs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .prng import SplitMix64, derive_seed


@dataclass(frozen=True)
class BscParams:
    e: float
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.e <= 0.5:
            raise ValueError(f"crossover {self.e} outside [0, 0.5]")


def bsc_transmit(word, params: BscParams) -> np.ndarray:
    """Flip each bit independently with probability ``params.e``."""
    word = np.asarray(word, dtype=np.uint8)
    flips = SplitMix64(params.seed).uniform(len(word)) < params.e
    return word ^ flips.astype(np.uint8)


def generate_key_pair(length: int, params: BscParams) -> tuple[np.ndarray, np.ndarray]:
    """Uniform ``x`` and ``y = BSC(x)``, both determined by ``params.seed``."""
    if length < 1:
        raise ValueError("length must be >= 1")
    x = SplitMix64(derive_seed(params.seed, "key")).bits(length)
    y = bsc_transmit(x, BscParams(params.e, derive_seed(params.seed, "flip")))
    return x, y
