"""Blind interactive reconciliation between Alice and Bob.

Alice embeds her key in a mother-code frame whose reserved symbols are all
punctured, and sends the frame syndrome.  Bob decodes with his correlated
copy.  On failure he answers Nack and Alice converts the next slice of
punctured symbols into shortened ones by revealing their values, which
lowers the code rate.  The session ends with Ack, or with Abort once the
minimum rate has also failed.

Wire framing (two-process mode), all integers big-endian::

    u32 payload length | u8 tag | payload

    tag 0 Start   u32 n, u32 m, f64 r0, f64 delta, u16 Q, u64 position seed,
                  syndrome packed MSB-first in ceil(m / 8) bytes
    tag 1 Reveal  u16 round, u32 count, count x (u32 position, u8 bit),
                  sorted by position
    tag 2 Ack     empty
    tag 3 Nack    empty
    tag 4 Abort   UTF-8 reason

The payload length excludes the tag byte.
"""

from __future__ import annotations

import enum
import hashlib
import queue
import struct
from dataclasses import dataclass, field

import numpy as np

from .decoder import DEFAULT_MAX_ITERS, DecodeResult, decode_syndrome, init_llrs
from .ldpc_core import ParityCheckMatrix, syndrome
from .metrics import ExecutionRecord, crossover_for_rate
from .prng import derive_seed
from .rate_adapt import (
    Frame,
    ModulationParams,
    Role,
    assemble_frame,
    build_schedule,
    convert_to_shortened,
    range_check,
    select_reserved_positions,
)


class ConfigurationError(ValueError):
    """Session parameters are unusable (e.g. the error range is not covered)."""


class ProtocolViolation(RuntimeError):
    """A peer sent a message that is invalid in the current state."""


class WireError(ValueError):
    """Bytes do not form a valid protocol frame."""


class Status(enum.Enum):
    RUNNING = "running"
    SUCCESS = "success"
    FAILURE = "failure"


# ---------------------------------------------------------------------------
# messages


@dataclass(frozen=True, eq=False)
class Start:
    n: int
    m: int
    r0: float
    delta: float
    q_rounds: int
    position_seed: int
    syndrome: np.ndarray

    def __eq__(self, other):
        return isinstance(other, Start) and encode_message(self) == encode_message(other)


@dataclass(frozen=True, eq=False)
class Reveal:
    round: int
    positions: np.ndarray
    bits: np.ndarray

    @classmethod
    def from_map(cls, round_: int, reveal: dict[int, int]) -> "Reveal":
        pos = np.array(sorted(reveal), dtype=np.int64)
        return cls(round_, pos, np.array([reveal[p] for p in pos], dtype=np.uint8))

    def __len__(self):
        return len(self.positions)

    def __eq__(self, other):
        return isinstance(other, Reveal) and encode_message(self) == encode_message(other)


@dataclass(frozen=True)
class Ack:
    pass


@dataclass(frozen=True)
class Nack:
    pass


@dataclass(frozen=True)
class Abort:
    reason: str


Message = Start | Reveal | Ack | Nack | Abort

_TAGS = {Start: 0, Reveal: 1, Ack: 2, Nack: 3, Abort: 4}
_START_HEAD = struct.Struct(">IIddHQ")
_REVEAL_HEAD = struct.Struct(">HI")
_ENTRY = np.dtype([("pos", ">u4"), ("bit", "u1")])
_LEN = struct.Struct(">IB")


def _payload(msg: Message) -> bytes:
    if isinstance(msg, Start):
        bits = np.asarray(msg.syndrome, dtype=np.uint8)
        if len(bits) != msg.m:
            raise WireError(f"Start carries {len(bits)} syndrome bits, m={msg.m}")
        head = _START_HEAD.pack(msg.n, msg.m, msg.r0, msg.delta, msg.q_rounds, msg.position_seed)
        return head + np.packbits(bits).tobytes()
    if isinstance(msg, Reveal):
        order = np.argsort(msg.positions, kind="stable")
        entries = np.empty(len(msg.positions), dtype=_ENTRY)
        entries["pos"] = np.asarray(msg.positions)[order]
        entries["bit"] = np.asarray(msg.bits)[order]
        return _REVEAL_HEAD.pack(msg.round, len(entries)) + entries.tobytes()
    if isinstance(msg, Abort):
        return msg.reason.encode("utf-8")
    return b""


def encode_message(msg: Message) -> bytes:
    """Full wire frame: length prefix, tag and payload."""
    payload = _payload(msg)
    return _LEN.pack(len(payload), _TAGS[type(msg)]) + payload


def decode_payload(tag: int, payload: bytes) -> Message:
    if tag == 0:
        if len(payload) < _START_HEAD.size:
            raise WireError("truncated Start header")
        n, m, r0, delta, q, seed = _START_HEAD.unpack_from(payload)
        packed = np.frombuffer(payload, dtype=np.uint8, offset=_START_HEAD.size)
        if len(packed) != (m + 7) // 8:
            raise WireError(f"Start syndrome has {len(packed)} bytes for m={m}")
        return Start(n, m, r0, delta, q, seed, np.unpackbits(packed)[:m].copy())
    if tag == 1:
        if len(payload) < _REVEAL_HEAD.size:
            raise WireError("truncated Reveal header")
        round_, count = _REVEAL_HEAD.unpack_from(payload)
        body = payload[_REVEAL_HEAD.size:]
        if len(body) != count * _ENTRY.itemsize:
            raise WireError(f"Reveal declares {count} entries but carries {len(body)} bytes")
        entries = np.frombuffer(body, dtype=_ENTRY)
        return Reveal(round_, entries["pos"].astype(np.int64), entries["bit"].astype(np.uint8))
    if tag in (2, 3):
        if payload:
            raise WireError("Ack/Nack carry no payload")
        return Ack() if tag == 2 else Nack()
    if tag == 4:
        return Abort(payload.decode("utf-8", errors="replace"))
    raise WireError(f"unknown message tag {tag}")


def decode_message(data: bytes) -> Message:
    """Inverse of :func:`encode_message` for one complete frame."""
    if len(data) < _LEN.size:
        raise WireError("frame shorter than its header")
    length, tag = _LEN.unpack_from(data)
    if len(data) != _LEN.size + length:
        raise WireError(f"frame length {len(data)} does not match header {length}")
    return decode_payload(tag, data[_LEN.size:])


# ---------------------------------------------------------------------------
# transports


class LocalPort:
    """One end of an in-process duplex channel."""

    def __init__(self, inbox: queue.Queue, outbox: queue.Queue, wire: bool = False):
        self._inbox = inbox
        self._outbox = outbox
        self._wire = wire

    def send(self, msg: Message) -> None:
        self._outbox.put(encode_message(msg) if self._wire else msg)

    def recv(self, timeout: float | None = None) -> Message:
        item = self._inbox.get(timeout=timeout)
        return decode_message(item) if self._wire else item


def local_port_pair(wire: bool = False) -> tuple[LocalPort, LocalPort]:
    """Connected ports; ``wire=True`` round-trips every message through bytes."""
    a_to_b: queue.Queue = queue.Queue()
    b_to_a: queue.Queue = queue.Queue()
    return LocalPort(b_to_a, a_to_b, wire), LocalPort(a_to_b, b_to_a, wire)


class StreamPort:
    """Length-prefixed framing over a connected socket."""

    def __init__(self, sock):
        self._sock = sock

    def _read_exact(self, size: int) -> bytes:
        chunks = []
        while size:
            chunk = self._sock.recv(size)
            if not chunk:
                raise ConnectionError("peer closed the connection mid-frame")
            chunks.append(chunk)
            size -= len(chunk)
        return b"".join(chunks)

    def send(self, msg: Message) -> None:
        self._sock.sendall(encode_message(msg))

    def recv(self) -> Message:
        length, tag = _LEN.unpack(self._read_exact(_LEN.size))
        return decode_payload(tag, self._read_exact(length))


# ---------------------------------------------------------------------------
# parties


@dataclass(frozen=True)
class ProtocolConfig:
    """Knobs both parties agree on before the session.

    ``assumed_crossover=None`` matches the decoder's channel model to the
    current modulated rate (``1 - h2(e*) = R``), clamped to ``e_range`` when
    one is given.
    """

    delta: float = 0.1
    q_rounds: int = 6
    max_iters: int = DEFAULT_MAX_ITERS
    e_range: tuple[float, float] | None = None
    assumed_crossover: float | None = None
    verify: bool = False


def verification_tag(key) -> bytes:
    """64-bit digest of a key, for the optional post-Ack confirmation."""
    return hashlib.blake2b(np.packbits(np.asarray(key, dtype=np.uint8)).tobytes(), digest_size=8).digest()


class Alice:
    """Sender state machine: holds the reference key and the full frame."""

    def __init__(self, key, code: ParityCheckMatrix, config: ProtocolConfig, seed: int):
        self.code = code
        self.config = config
        self.params = ModulationParams(code.n, code.rate, config.delta, config.q_rounds)
        if config.e_range is not None and self.params.delta > 0:
            e0, e1 = config.e_range
            if not range_check(self.params.r0, self.params.delta, e0, e1):
                raise ConfigurationError(
                    f"delta={self.params.delta} on a rate-{self.params.r0:.4g} code "
                    f"does not cover crossover range [{e0}, {e1}]"
                )
        key = np.asarray(key, dtype=np.uint8)
        if len(key) != self.params.key_length:
            raise ValueError(f"key has {len(key)} bits, frame carries {self.params.key_length}")
        self.schedule = build_schedule(self.params)
        self.position_seed = derive_seed(seed, "positions")
        self._values_seed = derive_seed(seed, "punctured-values")
        self._convert_seed = derive_seed(seed, "conversion")
        reserved = select_reserved_positions(code.n, self.params.reserved, self.position_seed)
        self.frame: Frame = assemble_frame(key, reserved, seed=self._values_seed)
        self.round = 0
        self.disclosed_bits = 0
        self.status = Status.RUNNING
        self.reason = ""

    def start(self) -> Start:
        if self.disclosed_bits:
            raise ProtocolViolation("session already started")
        z = syndrome(self.code, self.frame.values)
        self.disclosed_bits = len(z)
        p = self.params
        return Start(p.n, self.code.m, p.r0, p.delta, p.q_rounds, self.position_seed, z)

    def on_nack(self) -> Reveal | Abort:
        if self.status is not Status.RUNNING:
            raise ProtocolViolation(f"Nack received in terminal state {self.status.value}")
        if self.round >= self.params.max_rounds:
            self.status = Status.FAILURE
            self.reason = "decoding failed at the minimum rate"
            return Abort(self.reason)
        nxt = self.round + 1
        count = self.schedule.reveal_size(nxt)
        self.frame, reveal = convert_to_shortened(self.frame, count, derive_seed(self._convert_seed, nxt))
        self.round = nxt
        self.disclosed_bits += count
        return Reveal.from_map(nxt, reveal)

    def on_message(self, msg: Message) -> Message | None:
        if isinstance(msg, Nack):
            return self.on_nack()
        if self.status is not Status.RUNNING:
            raise ProtocolViolation(f"{type(msg).__name__} received in terminal state")
        if isinstance(msg, Ack):
            self.status = Status.SUCCESS
        elif isinstance(msg, Abort):
            self.status = Status.FAILURE
            self.reason = msg.reason
        else:
            self.status = Status.FAILURE
            self.reason = f"unexpected {type(msg).__name__} from Bob"
            return Abort(self.reason)
        return None


class Bob:
    """Receiver state machine: decodes after every Start or Reveal."""

    def __init__(self, observed, code: ParityCheckMatrix, config: ProtocolConfig = ProtocolConfig()):
        self.observed = np.asarray(observed, dtype=np.uint8)
        self.code = code
        self.config = config
        self.params: ModulationParams | None = None
        self.schedule = None
        self.frame: Frame | None = None
        self.target: np.ndarray | None = None
        self.round = 0
        self.disclosed_bits = 0
        self.status = Status.RUNNING
        self.reason = ""
        self.last_decode: DecodeResult | None = None
        self.decode_attempts = 0

    def _abort(self, reason: str) -> Abort:
        self.status = Status.FAILURE
        self.reason = reason
        return Abort(reason)

    def assumed_crossover(self) -> float:
        if self.config.assumed_crossover is not None:
            return self.config.assumed_crossover
        e = crossover_for_rate(self.schedule[self.round].rate)
        if self.config.e_range is not None:
            e = min(max(e, self.config.e_range[0]), self.config.e_range[1])
        return min(max(e, 1e-6), 0.5 - 1e-6)

    def _decode(self) -> Message:
        f = self.frame
        shortened = {int(i): int(f.values[i]) for i in f.positions(Role.SHORTENED)}
        llrs = init_llrs(f.values, self.assumed_crossover(), f.positions(Role.PUNCTURED), shortened)
        self.last_decode = decode_syndrome(self.code, llrs, self.target, self.config.max_iters)
        self.decode_attempts += 1
        if self.last_decode.converged:
            self.status = Status.SUCCESS
            return Ack()
        if self.round < self.params.max_rounds:
            return Nack()
        return self._abort("decoding failed at the minimum rate")

    def _on_start(self, msg: Start) -> Message:
        if self.frame is not None:
            return self._abort("duplicate Start")
        if (msg.n, msg.m) != (self.code.n, self.code.m):
            return self._abort(f"Start is for a {msg.n}x{msg.m} code, local code is {self.code.n}x{self.code.m}")
        if abs(msg.r0 - self.code.rate) > 1e-12:
            return self._abort(f"Start rate {msg.r0} does not match local code rate {self.code.rate}")
        try:
            self.params = ModulationParams(msg.n, msg.r0, msg.delta, msg.q_rounds)
        except ValueError as exc:
            return self._abort(f"bad modulation parameters: {exc}")
        if len(self.observed) != self.params.key_length:
            return self._abort(f"local key has {len(self.observed)} bits, session needs {self.params.key_length}")
        self.schedule = build_schedule(self.params)
        reserved = select_reserved_positions(msg.n, self.params.reserved, msg.position_seed)
        self.frame = assemble_frame(self.observed, reserved, np.zeros(len(reserved), dtype=np.uint8))
        self.target = np.asarray(msg.syndrome, dtype=np.uint8)
        self.disclosed_bits = msg.m
        return self._decode()

    def _on_reveal(self, msg: Reveal) -> Message:
        if self.frame is None:
            return self._abort("Reveal before Start")
        expected = self.round + 1
        if msg.round != expected or expected > self.params.max_rounds:
            return self._abort(f"Reveal for round {msg.round}, expected {expected}")
        want = self.schedule.reveal_size(expected)
        if len(msg) != want:
            return self._abort(f"Reveal carries {len(msg)} entries, round {expected} needs {want}")
        pos = np.asarray(msg.positions, dtype=np.int64)
        bits = np.asarray(msg.bits)
        if len(pos) and np.any(np.diff(pos) <= 0):
            return self._abort("Reveal positions are unsorted or duplicated")
        if len(pos) and (pos[0] < 0 or pos[-1] >= self.code.n):
            return self._abort("Reveal position out of range")
        if not np.all(self.frame.roles[pos] == Role.PUNCTURED):
            return self._abort("Reveal names a position that is not punctured")
        if np.any(bits > 1):
            return self._abort("Reveal bit is not 0 or 1")
        self.frame.roles[pos] = Role.SHORTENED
        self.frame.values[pos] = bits
        self.round = expected
        self.disclosed_bits += len(pos)
        return self._decode()

    def on_message(self, msg: Message) -> Message | None:
        if self.status is not Status.RUNNING:
            raise ProtocolViolation(f"{type(msg).__name__} received in terminal state {self.status.value}")
        if isinstance(msg, Start):
            return self._on_start(msg)
        if isinstance(msg, Reveal):
            return self._on_reveal(msg)
        if isinstance(msg, Abort):
            self.status = Status.FAILURE
            self.reason = msg.reason
            return None
        return self._abort(f"unexpected {type(msg).__name__} from Alice")

    def decoded_key(self) -> np.ndarray | None:
        if self.status is not Status.SUCCESS:
            return None
        return self.last_decode.word[self.frame.roles == Role.KEY].copy()

    def best_guess(self) -> np.ndarray:
        """Key-position hard decisions from the last decode (or the raw input)."""
        if self.last_decode is None:
            return self.observed.copy()
        return self.last_decode.word[self.frame.roles == Role.KEY].copy()


def run_alice(alice: Alice, port) -> Status:
    """Blocking Alice loop over any port with ``send``/``recv``."""
    port.send(alice.start())
    while alice.status is Status.RUNNING:
        reply = alice.on_message(port.recv())
        if reply is not None:
            port.send(reply)
    return alice.status


def run_bob(bob: Bob, port) -> Status:
    """Blocking Bob loop; returns once the session is terminal."""
    while bob.status is Status.RUNNING:
        reply = bob.on_message(port.recv())
        if reply is not None:
            port.send(reply)
    return bob.status


# ---------------------------------------------------------------------------
# session driver


@dataclass
class SessionResult:
    success: bool
    rounds_used: int
    n: int
    r0: float
    delta: float
    p: int
    s: int
    rate: float
    disclosed_bits: int
    decoded_key: np.ndarray | None
    residual_errors: int
    decode_attempts: int
    reason: str = ""
    transcript: list = field(default_factory=list, repr=False)

    @property
    def pi(self) -> float:
        return self.p / self.n

    @property
    def sigma(self) -> float:
        return self.s / self.n

    @property
    def leaked_bits(self) -> int:
        """Net information about the key: disclosed bits minus the ``p + s``
        random reserved values they are masked by (``m - p`` without a tag)."""
        return self.disclosed_bits - self.p - self.s

    def record(self, e: float) -> ExecutionRecord:
        return ExecutionRecord(self.n, self.r0, self.delta, self.p, self.s, self.rounds_used, self.success, e)


def run_session(alice_key, bob_observed, code: ParityCheckMatrix, config: ProtocolConfig = ProtocolConfig(),
                seed: int = 0, wire: bool = False) -> SessionResult:
    """Drive both parties in-process until the session terminates.

    ``residual_errors`` compares Bob's final key estimate against Alice's key;
    it is simulator ground truth and plays no part in the protocol.
    """
    alice_key = np.asarray(alice_key, dtype=np.uint8)
    alice = Alice(alice_key, code, config, seed)
    bob = Bob(bob_observed, code, config)
    a_port, b_port = local_port_pair(wire)
    transcript: list[Message] = []

    def alice_sends(msg):
        transcript.append(msg)
        a_port.send(msg)

    alice_sends(alice.start())
    while True:
        reply = bob.on_message(b_port.recv())
        if reply is None:
            break
        transcript.append(reply)
        b_port.send(reply)
        out = alice.on_message(a_port.recv())
        if out is None:
            break
        alice_sends(out)

    success = alice.status is Status.SUCCESS and bob.status is Status.SUCCESS
    reason = bob.reason or alice.reason
    disclosed = alice.disclosed_bits
    decoded = bob.decoded_key()
    if success and config.verify:
        disclosed += 64
        if verification_tag(decoded) != verification_tag(alice_key):
            success = False
            reason = "verification tag mismatch"

    params = alice.params
    row = alice.schedule[alice.round]
    guess = bob.best_guess()
    residual = int(np.count_nonzero(guess != alice_key)) if len(guess) == len(alice_key) else len(alice_key)
    return SessionResult(
        success=success,
        rounds_used=alice.round,
        n=params.n,
        r0=params.r0,
        delta=params.delta,
        p=row.p,
        s=row.s,
        rate=row.rate,
        disclosed_bits=disclosed,
        decoded_key=decoded if success else None,
        residual_errors=residual,
        decode_attempts=bob.decode_attempts,
        reason=reason,
        transcript=transcript,
    )
