"""Syndrome belief-propagation decoding over a binary symmetric channel.

LLRs use the natural log with positive values favouring bit 0.  Punctured
symbols start at exactly 0, shortened symbols at ``+-L_SAT``.  Check updates
follow the tanh rule written in the ``phi(x) = -log tanh(x/2)`` domain, with
each check's output sign flipped when its target syndrome bit is 1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .ldpc_core import ParityCheckMatrix, syndrome

L_SAT = 30.0
DEFAULT_MAX_ITERS = 100
_MIN_MAG = 1e-12


class Outcome(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters_reached"


@dataclass
class DecodeResult:
    outcome: Outcome
    word: np.ndarray
    iterations: int
    syndrome_matched: bool

    @property
    def converged(self) -> bool:
        return self.outcome is Outcome.CONVERGED


def channel_llr(e: float) -> float:
    """``ln((1 - e) / e)`` for a BSC with crossover ``e``."""
    return math.log((1.0 - e) / e)


def init_llrs(observed, assumed_crossover: float, punctured=(), shortened=None) -> np.ndarray:
    """Initial decoder LLRs for a frame.

    Parameters
    ----------
    observed : array of {0, 1}
        Length-``n`` word; only its key positions are used.
    assumed_crossover : float
        Channel model crossover in (0, 0.5).
    punctured : iterable of int
        Positions with no information.
    shortened : mapping of int to bit
        Positions whose value is known exactly.
    """
    if not 0.0 < assumed_crossover < 0.5:
        raise ValueError(f"assumed crossover {assumed_crossover} outside (0, 0.5)")
    observed = np.asarray(observed, dtype=np.uint8)
    shortened = shortened or {}
    punct = np.asarray(sorted(punctured), dtype=np.int64)
    if len(np.unique(punct)) != len(punct):
        raise ValueError("duplicate punctured position")
    short_pos = np.fromiter(shortened.keys(), dtype=np.int64, count=len(shortened))
    short_bits = np.fromiter(shortened.values(), dtype=np.int64, count=len(shortened))
    if np.intersect1d(punct, short_pos).size:
        raise ValueError("punctured and shortened positions overlap")
    for pos in (punct, short_pos):
        if pos.size and (pos.min() < 0 or pos.max() >= len(observed)):
            raise ValueError("position outside the frame")

    llrs = channel_llr(assumed_crossover) * (1.0 - 2.0 * observed)
    llrs[punct] = 0.0
    llrs[short_pos] = L_SAT * (1.0 - 2.0 * short_bits)
    return llrs


def _phi(x: np.ndarray) -> np.ndarray:
    return -np.log(np.tanh(0.5 * x))


def decode_syndrome(h: ParityCheckMatrix, llrs, target, max_iters: int = DEFAULT_MAX_ITERS) -> DecodeResult:
    """Flooding sum-product decoding towards ``target``.

    The hard decision is tested after every iteration and decoding stops at
    the first syndrome match.  Failing to converge is a normal result.
    """
    llr0 = np.clip(np.asarray(llrs, dtype=np.float64), -L_SAT, L_SAT)
    target = np.asarray(target, dtype=np.uint8)
    if llr0.shape != (h.n,):
        raise ValueError(f"llrs have shape {llr0.shape}, expected ({h.n},)")
    if target.shape != (h.m,):
        raise ValueError(f"target has shape {target.shape}, expected ({h.m},)")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")

    ev, ec = h.edge_var, h.edge_check
    flip = target[ec].astype(bool)
    c2v = np.zeros(len(ev))
    total = llr0.copy()
    word = (total < 0).astype(np.uint8)
    for it in range(1, max_iters + 1):
        v2c = np.clip(total[ev] - c2v, -L_SAT, L_SAT)
        ph = _phi(np.clip(np.abs(v2c), _MIN_MAG, L_SAT))
        neg = v2c < 0
        sum_ph = np.bincount(ec, weights=ph, minlength=h.m)
        odd = (np.bincount(ec, weights=neg, minlength=h.m).astype(np.int64) & 1).astype(bool)
        ext = np.maximum(sum_ph[ec] - ph, _phi(L_SAT))
        mag = np.minimum(_phi(ext), L_SAT)
        negative_out = odd[ec] ^ neg ^ flip
        c2v = np.where(negative_out, -mag, mag)
        total = llr0 + np.bincount(ev, weights=c2v, minlength=h.n)
        word = (total < 0).astype(np.uint8)
        if np.array_equal(syndrome(h, word), target):
            return DecodeResult(Outcome.CONVERGED, word, it, True)
    return DecodeResult(Outcome.MAX_ITERS, word, max_iters, False)
