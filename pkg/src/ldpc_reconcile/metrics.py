"""Entropy, reconciliation efficiency and sweep aggregation."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from scipy.optimize import brentq


def binary_entropy(e: float) -> float:
    """Binary Shannon entropy in bits, with ``h2(0) = h2(1) = 0``."""
    if not 0.0 <= e <= 1.0:
        raise ValueError(f"probability {e} outside [0, 1]")
    if e == 0.0 or e == 1.0:
        return 0.0
    return -e * math.log2(e) - (1.0 - e) * math.log2(1.0 - e)


@lru_cache(maxsize=4096)
def crossover_for_rate(rate: float) -> float:
    """Crossover ``e`` in (0, 0.5) with ``1 - h2(e) = rate``."""
    if not 0.0 < rate < 1.0:
        raise ValueError(f"rate {rate} outside (0, 1)")
    return brentq(lambda e: 1.0 - binary_entropy(e) - rate, 1e-15, 0.5, xtol=1e-15, rtol=1e-15)


def _check_crossover(e: float) -> None:
    if not 0.0 < e < 0.5:
        raise ValueError(f"efficiency is undefined for crossover {e}")


def execution_efficiency(r0: float, delta: float, pi: float, e: float) -> float:
    """Efficiency ``(1 - r0 - pi) / ((1 - delta) h2(e))`` of a finished run.

    Linear in ``pi``, so the same formula serves a single run and the mean
    punctured fraction of many runs.
    """
    _check_crossover(e)
    return (1.0 - r0 - pi) / ((1.0 - delta) * binary_entropy(e))


def round_efficiency_params(r0: float, delta: float, q_step: float, e: float) -> tuple[float, float]:
    """Return ``(f0, eps)`` so that a run ending in round ``j`` has ``f0 + j*eps``."""
    _check_crossover(e)
    scale = (1.0 - delta) * binary_entropy(e)
    return (1.0 - r0 - delta) / scale, q_step / scale


def raw_efficiency(disclosed_bits: float, key_length: int, e: float) -> float:
    """Disclosed bits per key bit over ``h2(e)``."""
    if key_length <= 0:
        raise ValueError("key_length must be positive")
    _check_crossover(e)
    return (disclosed_bits / key_length) / binary_entropy(e)


@dataclass(frozen=True)
class ExecutionRecord:
    """Final state of one reconciliation run."""

    n: int
    r0: float
    delta: float
    p: int
    s: int
    rounds: int
    success: bool
    e: float

    @property
    def pi(self) -> float:
        return self.p / self.n

    @property
    def sigma(self) -> float:
        return self.s / self.n


@dataclass(frozen=True)
class AggregateStats:
    """Sweep statistics for one crossover value.

    ``n_hat``, ``p_hat`` and ``s_hat`` average every run.  ``pi_hat`` and
    ``sigma_hat`` average the successful runs and ``f_hat`` is computed from
    that ``pi_hat``; all three are ``None`` when nothing succeeded.
    """

    e: float
    m: int
    n_hat: float
    p_hat: float
    s_hat: float
    pi_hat: float | None
    sigma_hat: float | None
    f_hat: float | None
    fer: float


def aggregate(records) -> AggregateStats:
    records = list(records)
    if not records:
        raise ValueError("cannot aggregate an empty record list")
    first = records[0]
    for rec in records:
        if (rec.e, rec.n, rec.r0, rec.delta) != (first.e, first.n, first.r0, first.delta):
            raise ValueError("records mix different crossover or code parameters")
    count = len(records)
    good = [r for r in records if r.success]
    pi_hat = sigma_hat = f_hat = None
    if good:
        pi_hat = math.fsum(r.pi for r in good) / len(good)
        sigma_hat = math.fsum(r.sigma for r in good) / len(good)
        if 0.0 < first.e < 0.5:
            f_hat = execution_efficiency(first.r0, first.delta, pi_hat, first.e)
    return AggregateStats(
        e=first.e,
        m=count,
        n_hat=math.fsum(r.rounds for r in records) / count,
        p_hat=math.fsum(r.p for r in records) / count,
        s_hat=math.fsum(r.s for r in records) / count,
        pi_hat=pi_hat,
        sigma_hat=sigma_hat,
        f_hat=f_hat,
        fer=(count - len(good)) / count,
    )
