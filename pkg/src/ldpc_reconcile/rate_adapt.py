"""Puncturing and shortening algebra, round schedules and frame assembly.

A mother code ``[n, k]`` of rate ``R0 = k/n`` becomes ``[n - p - s, k - s]``
after puncturing ``p`` symbols and shortening ``s``.  Both counts always add
up to ``d = floor(delta * n)``, so the number of key bits carried by a frame
never changes between rounds; each failed round only moves symbols from the
punctured pool to the shortened pool.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass

import numpy as np

from .metrics import binary_entropy
from .prng import SplitMix64

_EPS = 1e-9


def modulated_rate(r0: float, pi: float, sigma: float) -> float:
    """Rate ``(r0 - sigma) / (1 - pi - sigma)`` after modulation."""
    if pi < 0 or sigma < 0:
        raise ValueError("puncturing and shortening fractions must be non-negative")
    denom = 1.0 - pi - sigma
    if denom <= 0:
        raise ValueError(f"pi + sigma = {pi + sigma} leaves no transmitted symbols")
    rate = (r0 - sigma) / denom
    if not 0.0 < rate < 1.0:
        raise ValueError(f"modulated rate {rate} outside (0, 1)")
    return rate


def rate_bounds(r0: float, delta: float) -> tuple[float, float]:
    """``(R_min, R_max)`` reachable with total modulation fraction ``delta``."""
    if delta < 0 or delta > r0 or delta >= 1:
        raise ValueError(f"delta={delta} must satisfy 0 <= delta <= r0={r0} and delta < 1")
    return (r0 - delta) / (1.0 - delta), r0 / (1.0 - delta)


def range_check(r0: float, delta: float, e0: float, e1: float) -> bool:
    """True when the modulated code covers crossover probabilities ``[e0, e1]``."""
    r_min, r_max = rate_bounds(r0, delta)
    return r_min <= 1.0 - binary_entropy(e1) and r_max >= 1.0 - binary_entropy(e0)


def reserved_count(n: int, delta: float) -> int:
    """``floor(delta * n)``, robust to representation error in ``delta``."""
    return math.floor(delta * n + _EPS)


def symbols_for_rate(n: int, r0: float, delta: float, target_rate: float) -> tuple[int, int]:
    """Punctured and shortened counts ``(p, s)`` that realize ``target_rate``."""
    r_min, r_max = rate_bounds(r0, delta)
    if not r_min - _EPS <= target_rate <= r_max + _EPS:
        raise ValueError(f"rate {target_rate} outside [{r_min}, {r_max}]")
    d = reserved_count(n, delta)
    s = math.ceil((r0 - target_rate * (1.0 - delta)) * n - _EPS)
    s = min(max(s, 0), d)
    return d - s, s


@dataclass(frozen=True)
class ModulationParams:
    """Mother-code length and rate plus the agreed modulation budget."""

    n: int
    r0: float
    delta: float
    q_rounds: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be positive")
        if not 0.0 < self.r0 < 1.0:
            raise ValueError(f"r0={self.r0} outside (0, 1)")
        if not 0.0 <= self.delta < 1.0 - self.r0:
            raise ValueError(f"delta={self.delta} must lie in [0, 1 - r0)")
        if self.delta > self.r0:
            raise ValueError(f"delta={self.delta} exceeds r0={self.r0}")
        if self.q_rounds < 0:
            raise ValueError("q_rounds must be >= 0")
        if self.reserved > 0 and self.reserved < self.q_rounds:
            raise ValueError(f"floor(delta*n)={self.reserved} < Q={self.q_rounds}")

    @property
    def reserved(self) -> int:
        return reserved_count(self.n, self.delta)

    @property
    def max_rounds(self) -> int:
        """Extra rounds actually available (0 when nothing is reserved)."""
        return self.q_rounds if self.reserved else 0

    @property
    def q_step(self) -> float:
        return self.delta / self.q_rounds if self.q_rounds else 0.0

    @property
    def key_length(self) -> int:
        return self.n - self.reserved


@dataclass(frozen=True)
class ScheduleRow:
    round: int
    p: int
    s: int
    rate: float


@dataclass(frozen=True)
class RoundSchedule:
    params: ModulationParams
    rows: tuple[ScheduleRow, ...]

    def __len__(self):
        return len(self.rows)

    def __getitem__(self, j: int) -> ScheduleRow:
        return self.rows[j]

    def reveal_size(self, j: int) -> int:
        """Symbols converted when moving from round ``j - 1`` to ``j``."""
        return self.rows[j].s - self.rows[j - 1].s

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["round", "delta", "pi_star", "sigma_star", "p", "s", "R0", "R"])
        d = self.params.reserved
        for row in self.rows:
            pi_star = row.p / d if d else 0.0
            sigma_star = row.s / d if d else 0.0
            writer.writerow([
                row.round, f"{self.params.delta:g}", f"{pi_star:.2f}", f"{sigma_star:.2f}",
                row.p, row.s, f"{self.params.r0:g}", f"{row.rate:.2f}",
            ])
        return buf.getvalue()


def build_schedule(params: ModulationParams) -> RoundSchedule:
    """Per-round ``(p_j, s_j, R_j)`` with ``s_j = ceil(j * d / Q)``."""
    n, d, q = params.n, params.reserved, params.max_rounds
    rows = []
    for j in range(q + 1):
        s = -(-j * d // q) if q else 0
        p = d - s
        rows.append(ScheduleRow(j, p, s, modulated_rate(params.r0, p / n, s / n)))
    return RoundSchedule(params, tuple(rows))


class Role(enum.IntEnum):
    KEY = 0
    PUNCTURED = 1
    SHORTENED = 2


@dataclass
class Frame:
    """Length-``n`` word with a role per position.

    ``values`` holds Alice's bits everywhere; Bob's copy holds his observed
    bits at key positions and the revealed bits at shortened positions.
    """

    values: np.ndarray
    roles: np.ndarray

    @property
    def n(self) -> int:
        return len(self.values)

    def positions(self, role: Role) -> np.ndarray:
        return np.flatnonzero(self.roles == role)

    @property
    def punctured_count(self) -> int:
        return int(np.count_nonzero(self.roles == Role.PUNCTURED))

    @property
    def shortened_count(self) -> int:
        return int(np.count_nonzero(self.roles == Role.SHORTENED))

    def key(self) -> np.ndarray:
        return self.values[self.roles == Role.KEY].copy()

    def copy(self) -> "Frame":
        return Frame(self.values.copy(), self.roles.copy())


def select_reserved_positions(n: int, count: int, seed: int) -> np.ndarray:
    """Seed-derived reserved positions, identical on both sides of a session."""
    return SplitMix64(seed).choose(n, count)


def assemble_frame(key, reserved_positions, punctured_values=None, seed: int = 0,
                   delta: float | None = None) -> Frame:
    """Embed ``key`` at the non-reserved positions in ascending order.

    Reserved positions are marked punctured and filled with
    ``punctured_values``, or with random bits drawn from ``seed`` when no
    values are given.  With ``delta`` set, the reserved count must equal
    ``floor(delta * n)``.
    """
    key = np.asarray(key, dtype=np.uint8)
    reserved = np.asarray(reserved_positions, dtype=np.int64)
    n = len(key) + len(reserved)
    if delta is not None and len(reserved) != reserved_count(n, delta):
        raise ValueError(f"{len(reserved)} reserved positions, delta={delta} needs {reserved_count(n, delta)}")
    if len(np.unique(reserved)) != len(reserved):
        raise ValueError("reserved positions collide")
    if len(reserved) and (reserved.min() < 0 or reserved.max() >= n):
        raise ValueError(f"reserved position outside [0, {n})")
    if punctured_values is None:
        punctured_values = SplitMix64(seed).bits(len(reserved))
    punctured_values = np.asarray(punctured_values, dtype=np.uint8)
    if len(punctured_values) != len(reserved):
        raise ValueError("one punctured value is needed per reserved position")

    roles = np.full(n, Role.KEY, dtype=np.int8)
    roles[reserved] = Role.PUNCTURED
    values = np.zeros(n, dtype=np.uint8)
    values[roles == Role.KEY] = key
    values[reserved] = punctured_values
    return Frame(values, roles)


def convert_to_shortened(frame: Frame, count: int, seed: int) -> tuple[Frame, dict[int, int]]:
    """Turn ``count`` random punctured positions into shortened ones.

    Returns the new frame and the reveal map ``{position: bit}`` that Alice
    discloses for them.
    """
    punctured = frame.positions(Role.PUNCTURED)
    if count < 0 or count > len(punctured):
        raise ValueError(f"cannot convert {count} of {len(punctured)} punctured symbols")
    picked = punctured[SplitMix64(seed).choose(len(punctured), count)]
    out = frame.copy()
    out.roles[picked] = Role.SHORTENED
    return out, {int(i): int(frame.values[i]) for i in picked}
