import socket
import struct
import threading

import numpy as np
import pytest

from ldpc_reconcile.channel import BscParams, generate_key_pair
from ldpc_reconcile.ldpc_core import ParityCheckMatrix, syndrome
from ldpc_reconcile.prng import SplitMix64
from ldpc_reconcile.protocol import (
    Abort,
    Ack,
    Alice,
    Bob,
    ConfigurationError,
    Nack,
    ProtocolConfig,
    ProtocolViolation,
    Reveal,
    Start,
    Status,
    StreamPort,
    WireError,
    decode_message,
    encode_message,
    local_port_pair,
    run_alice,
    run_bob,
    run_session,
)
from ldpc_reconcile.simulation import simulate_session, trial_seed

CFG = ProtocolConfig(delta=0.1, q_rounds=6, e_range=(0.062, 0.092))


@pytest.fixture(scope="module")
def full_length_code():
    # n = 2e5, m = 8e4 sparse stand-in: enough to exercise Alice's bookkeeping at full length
    n, m = 200_000, 80_000
    rows = tuple(tuple(c for c in (i, i + m, i + 2 * m) if c < n) for i in range(m))
    return ParityCheckMatrix(n, rows)


def keys(code, e, seed, delta=0.1):
    d = int(code.n * delta + 1e-9)
    return generate_key_pair(code.n - d, BscParams(e, seed))


# --- codec -------------------------------------------------------------------

def test_start_wire_layout():
    msg = Start(16, 10, 0.375, 0.125, 3, 0x0102030405060708,
                np.array([1, 0, 1, 1, 0, 0, 0, 1, 1, 1], np.uint8))
    data = encode_message(msg)
    header = struct.pack(">IIddHQ", 16, 10, 0.375, 0.125, 3, 0x0102030405060708)
    payload = header + bytes([0b10110001, 0b11000000])
    assert data == struct.pack(">I", len(payload)) + b"\x00" + payload
    assert decode_message(data) == msg


def test_reveal_wire_layout_sorted():
    msg = Reveal(2, np.array([40, 7]), np.array([1, 0], np.uint8))
    data = encode_message(msg)
    payload = struct.pack(">HI", 2, 2) + struct.pack(">IB", 7, 0) + struct.pack(">IB", 40, 1)
    assert data == struct.pack(">I", len(payload)) + b"\x01" + payload
    back = decode_message(data)
    assert back.positions.tolist() == [7, 40] and back.bits.tolist() == [0, 1]


@pytest.mark.parametrize("msg, tag", [(Ack(), 2), (Nack(), 3), (Abort("boom"), 4)])
def test_small_messages(msg, tag):
    data = encode_message(msg)
    assert data[4] == tag
    assert decode_message(data) == msg


@pytest.mark.parametrize("data", [
    b"\x00\x00",
    struct.pack(">IB", 5, 2) + b"abc",                     # length mismatch
    struct.pack(">IB", 1, 3) + b"x",                       # Nack with payload
    struct.pack(">IB", 0, 9),                              # unknown tag
    struct.pack(">IB", 7, 1) + struct.pack(">HI", 1, 1) + b"\x00",  # truncated entry
    struct.pack(">IB", 4, 0) + b"abcd",                    # truncated Start
])
def test_malformed_frames(data):
    with pytest.raises(WireError):
        decode_message(data)


def test_start_requires_m_bits():
    with pytest.raises(WireError):
        encode_message(Start(16, 10, 0.4, 0.1, 3, 1, np.zeros(9, np.uint8)))


def test_transcript_messages_survive_wire(desk_code):
    x, y = keys(desk_code, 0.065, 3)
    res = run_session(x, y, desk_code, CFG, seed=3)
    for msg in res.transcript:
        assert decode_message(encode_message(msg)) == msg


# --- Alice ---------------------------------------------------------------------

def test_alice_start_full_length(full_length_code):
    key = SplitMix64(1).bits(180_000)
    alice = Alice(key, full_length_code, ProtocolConfig(delta=0.1, q_rounds=6), seed=5)
    start = alice.start()
    assert start.m == 80_000 and len(start.syndrome) == 80_000
    assert alice.frame.punctured_count == 20_000 and alice.frame.shortened_count == 0
    assert round(alice.schedule[0].rate, 2) == 0.67
    assert np.array_equal(start.syndrome, syndrome(full_length_code, alice.frame.values))
    reveal = alice.on_nack()
    assert abs(len(reveal) - 3334) <= 1
    assert alice.disclosed_bits == 80_000 + len(reveal)
    for _ in range(5):
        reveal = alice.on_nack()
    assert alice.round == 6
    assert alice.frame.punctured_count == 0 and alice.frame.shortened_count == 20_000
    assert isinstance(alice.on_nack(), Abort)
    assert alice.status is Status.FAILURE
    with pytest.raises(ProtocolViolation):
        alice.on_nack()


def test_alice_rejects_wrong_key_length(desk_code):
    with pytest.raises(ValueError):
        Alice(np.zeros(1799, np.uint8), desk_code, CFG, 0)


def test_alice_rejects_uncovered_range(desk_code):
    with pytest.raises(ConfigurationError):
        Alice(np.zeros(1800, np.uint8), desk_code, ProtocolConfig(e_range=(0.01, 0.02)), 0)


def test_delta_zero_is_single_shot(desk_code):
    x, y = keys(desk_code, 0.0, 1, delta=0.0)
    res = run_session(x, y, desk_code, ProtocolConfig(delta=0.0), seed=1)
    assert res.success and res.rounds_used == 0
    assert [type(m) for m in res.transcript] == [Start, Ack]
    x, y = keys(desk_code, 0.12, 1, delta=0.0)
    res = run_session(x, y, desk_code, ProtocolConfig(delta=0.0), seed=1)
    assert not res.success
    assert [type(m) for m in res.transcript] == [Start, Abort]


# --- Bob -----------------------------------------------------------------------

def test_bob_acks_identical_keys(desk_code):
    x, _ = keys(desk_code, 0.0, 4)
    alice = Alice(x, desk_code, CFG, 4)
    bob = Bob(x, desk_code, CFG)
    assert isinstance(bob.on_message(alice.start()), Ack)
    assert bob.status is Status.SUCCESS
    assert np.array_equal(bob.decoded_key(), x)


def _bob_after_nack(code, seed=8):
    x, y = keys(code, 0.09, seed)
    alice = Alice(x, code, CFG, seed)
    bob = Bob(y, code, CFG)
    reply = bob.on_message(alice.start())
    assert isinstance(reply, Nack)
    return alice, bob


def test_bob_aborts_on_wrong_reveal_count(desk_code):
    alice, bob = _bob_after_nack(desk_code)
    good = alice.on_nack()
    bad = Reveal(1, good.positions[:-1], good.bits[:-1])
    assert isinstance(bob.on_message(bad), Abort)
    assert bob.status is Status.FAILURE


@pytest.mark.parametrize("mutate", ["round", "duplicate", "not_punctured", "out_of_range"])
def test_bob_rejects_bad_reveals(desk_code, mutate):
    alice, bob = _bob_after_nack(desk_code)
    good = alice.on_nack()
    pos, bits = good.positions.copy(), good.bits.copy()
    rnd = 1
    if mutate == "round":
        rnd = 2
    elif mutate == "duplicate":
        pos[1] = pos[0]
    elif mutate == "not_punctured":
        key_pos = np.flatnonzero(bob.frame.roles == 0)
        pos[0] = key_pos[0]
        pos.sort()
    else:
        pos[-1] = desk_code.n + 5
    assert isinstance(bob.on_message(Reveal(rnd, pos, bits)), Abort)


def test_bob_rejects_out_of_order(desk_code):
    bob = Bob(np.zeros(1800, np.uint8), desk_code, CFG)
    assert isinstance(bob.on_message(Reveal(1, np.array([1]), np.array([0], np.uint8))), Abort)
    with pytest.raises(ProtocolViolation):
        bob.on_message(Nack())


def test_bob_rejects_mismatched_code(desk_code, hand_code):
    start = Start(12, 6, 0.5, 0.1, 1, 0, np.zeros(6, np.uint8))
    assert isinstance(Bob(np.zeros(11, np.uint8), hand_code, CFG).on_message(start), Ack)
    assert isinstance(Bob(np.zeros(10, np.uint8), hand_code, CFG).on_message(start), Abort)
    assert isinstance(Bob(np.zeros(1800, np.uint8), desk_code, CFG).on_message(start), Abort)


# --- sessions --------------------------------------------------------------------

def test_zero_error_session(desk_code):
    x, _ = keys(desk_code, 0.0, 2)
    res = run_session(x, x, desk_code, CFG, seed=2)
    assert res.success and res.rounds_used == 0
    assert res.disclosed_bits == desk_code.m
    assert res.residual_errors == 0
    assert np.array_equal(res.decoded_key, x)


def test_session_invariants_and_round_trace(desk_code):
    sched_s = [0, 34, 67, 100, 134, 167, 200]
    for t in range(12):
        res = simulate_session(desk_code, CFG, 0.07, trial_seed(11, 0.07, t))
        types = [type(m) for m in res.transcript]
        assert types[0] is Start
        assert len(res.transcript) <= 2 * (6 + 1) + 1
        assert res.decode_attempts == res.rounds_used + 1 <= 7
        assert res.p + res.s == 200 and res.s == sched_s[res.rounds_used]
        assert res.disclosed_bits == desk_code.m + res.s
        assert res.leaked_bits == desk_code.m - res.p
        reveals = [m for m in res.transcript if isinstance(m, Reveal)]
        assert [len(r) for r in reveals] == [b - a for a, b in zip(sched_s, sched_s[1:])][: len(reveals)]
        assert types.count(Nack) == res.rounds_used
        if res.success:
            assert types[-1] is Ack
        else:
            assert types[-1] is Abort and res.rounds_used == 6


def test_desk_sessions_at_007(desk_code):
    results = [simulate_session(desk_code, CFG, 0.07, trial_seed(3, 0.07, t)) for t in range(40)]
    # R_max = 0.667 exceeds 1 - h2(0.07) = 0.634, so round 0 never suffices
    assert all(r.rounds_used >= 1 for r in results)
    wins = [r for r in results if r.success]
    assert len(wins) >= 6  # ~33% measured at this length
    assert all(r.rounds_used <= 6 and r.residual_errors == 0 for r in wins)


def test_out_of_range_crossover_fails(desk_code):
    results = [simulate_session(desk_code, CFG, 0.12, trial_seed(5, 0.12, t)) for t in range(10)]
    assert sum(not r.success for r in results) >= 9
    assert all(r.reason for r in results if not r.success)


def test_transcript_replay_reproduces_bob(desk_code):
    for t in range(5):
        x, y = keys(desk_code, 0.065, 100 + t)
        res = run_session(x, y, desk_code, CFG, seed=100 + t)
        bob = Bob(y, desk_code, CFG)
        for msg in res.transcript:
            if isinstance(msg, (Start, Reveal)) or (isinstance(msg, Abort) and bob.status is Status.RUNNING):
                bob.on_message(msg)
        assert (bob.status is Status.SUCCESS) == res.success
        if res.success:
            assert np.array_equal(bob.decoded_key(), res.decoded_key)


def test_wire_mode_matches_object_mode(desk_code):
    x, y = keys(desk_code, 0.065, 9)
    a = run_session(x, y, desk_code, CFG, seed=9)
    b = run_session(x, y, desk_code, CFG, seed=9, wire=True)
    assert (a.success, a.rounds_used, a.disclosed_bits, a.residual_errors) == \
        (b.success, b.rounds_used, b.disclosed_bits, b.residual_errors)
    assert [encode_message(m) for m in a.transcript] == [encode_message(m) for m in b.transcript]


def test_verification_tag_option(desk_code):
    x, _ = keys(desk_code, 0.0, 2)
    res = run_session(x, x, desk_code, ProtocolConfig(verify=True), seed=2)
    assert res.success and res.disclosed_bits == desk_code.m + 64


def _threaded(alice, bob, port_a, port_b):
    out = {}
    t = threading.Thread(target=lambda: out.setdefault("bob", run_bob(bob, port_b)))
    t.start()
    out["alice"] = run_alice(alice, port_a)
    t.join(timeout=60)
    return out


def test_threaded_local_ports(desk_code):
    x, y = keys(desk_code, 0.06, 21)
    a, b = local_port_pair(wire=True)
    out = _threaded(Alice(x, desk_code, CFG, 21), Bob(y, desk_code, CFG), a, b)
    ref = run_session(x, y, desk_code, CFG, seed=21)
    assert (out["alice"] is Status.SUCCESS) == ref.success
    assert out["alice"] is out["bob"]


def test_socket_transport(desk_code):
    x, y = keys(desk_code, 0.06, 22)
    s1, s2 = socket.socketpair()
    with s1, s2:
        alice = Alice(x, desk_code, CFG, 22)
        bob = Bob(y, desk_code, CFG)
        out = _threaded(alice, bob, StreamPort(s1), StreamPort(s2))
    ref = run_session(x, y, desk_code, CFG, seed=22)
    assert (out["bob"] is Status.SUCCESS) == ref.success
    assert alice.round == ref.rounds_used and bob.disclosed_bits == ref.disclosed_bits
    if ref.success:
        assert np.array_equal(bob.decoded_key(), x)
