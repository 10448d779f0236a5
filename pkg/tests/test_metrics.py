import itertools
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldpc_reconcile.metrics import (
    ExecutionRecord,
    aggregate,
    binary_entropy,
    crossover_for_rate,
    execution_efficiency,
    raw_efficiency,
    round_efficiency_params,
)
from ldpc_reconcile.rate_adapt import modulated_rate

# (e, pi_hat, f_hat) rows; f_hat also re-derived with mpmath at 30 digits
REFERENCE_ROWS = [
    (0.055, 0.0995, 1.08664),
    (0.060, 0.0813, 1.08144),
    (0.065, 0.0607, 1.08651),
    (0.070, 0.0480, 1.06883),
    (0.075, 0.0270, 1.07841),
    (0.080, 0.0167, 1.05895),
]


def test_binary_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.08) == pytest.approx(0.402179190202, abs=1e-6)
    with pytest.raises(ValueError):
        binary_entropy(1.1)


@settings(max_examples=200)
@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_binary_entropy_shape(a, b):
    assert binary_entropy(a) == pytest.approx(binary_entropy(1 - a), abs=1e-12)
    assert binary_entropy(a) <= 1.0
    mid = binary_entropy((a + b) / 2)
    assert mid >= (binary_entropy(a) + binary_entropy(b)) / 2 - 1e-12


def test_crossover_for_rate_inverts_entropy():
    for rate in (0.3, 5 / 9, 0.6, 2 / 3, 0.9):
        e = crossover_for_rate(rate)
        assert 0 < e < 0.5
        assert 1 - binary_entropy(e) == pytest.approx(rate, abs=1e-12)
    assert crossover_for_rate(2 / 3) == pytest.approx(0.0614904700787, abs=1e-10)


@pytest.mark.parametrize("e, pi_hat, f_hat", REFERENCE_ROWS)
def test_execution_efficiency_reproduces_table(e, pi_hat, f_hat):
    assert execution_efficiency(0.6, 0.1, pi_hat, e) == pytest.approx(f_hat, abs=5e-4)


def test_unit_efficiency_fixed_point():
    e = 0.07
    pi = 1 - 0.6 - 0.9 * binary_entropy(e)
    assert execution_efficiency(0.6, 0.1, pi, e) == pytest.approx(1.0, abs=1e-14)


def test_efficiency_undefined_at_zero_crossover():
    with pytest.raises(ValueError):
        execution_efficiency(0.6, 0.1, 0.0, 0.0)
    with pytest.raises(ValueError):
        round_efficiency_params(0.6, 0.1, 0.01, 0.0)
    with pytest.raises(ValueError):
        raw_efficiency(100, 1000, 0.0)


def test_round_efficiency_params_example():
    f0, eps = round_efficiency_params(0.6, 0.1, 0.1 / 6, 0.08)
    assert f0 == pytest.approx(0.828817953424, abs=1e-9)
    assert eps == pytest.approx(0.046045441857, abs=1e-9)
    assert f0 + 5 * eps == pytest.approx(1.0590451627, abs=1e-9)
    assert f0 + 5 * eps == pytest.approx(1.05895, abs=5e-4)


@settings(max_examples=100)
@given(st.floats(0.3, 0.8), st.floats(0.01, 0.15), st.integers(1, 20), st.floats(0.01, 0.49))
def test_round_efficiency_matches_execution_efficiency(r0, delta, q, e):
    f0, eps = round_efficiency_params(r0, delta, delta / q, e)
    assert eps > 0
    for j in range(q + 1):
        direct = execution_efficiency(r0, delta, delta - j * delta / q, e)
        assert f0 + j * eps == pytest.approx(direct, rel=1e-12, abs=1e-12)


def test_raw_efficiency_examples():
    e = 0.07
    assert raw_efficiency(1000 * binary_entropy(e), 1000, e) == pytest.approx(1.0)
    assert raw_efficiency(0, 1000, e) == 0.0
    # leaked bits are m - p: the p punctured random values mask that much syndrome
    n, p = 200_000, 3_333
    assert raw_efficiency(n * 0.4 - p, 180_000, 0.08) == pytest.approx(1.0590, abs=1e-3)


@settings(max_examples=200)
@given(st.integers(1000, 400_000), st.floats(0.01, 0.49), st.floats(0, 1))
def test_raw_and_execution_efficiency_agree(n, e, frac):
    r0, delta = 0.6, 0.1
    d = round(n * delta)
    n = d * 10  # exact delta * n
    s = int(frac * d)
    p = d - s
    via_rate = (1 - modulated_rate(r0, p / n, s / n)) / binary_entropy(e)
    raw = raw_efficiency(n * (1 - r0) - p, n - d, e)
    assert raw == pytest.approx(execution_efficiency(r0, delta, p / n, e), rel=1e-9)
    assert raw == pytest.approx(via_rate, rel=1e-9)


def _rec(p, s, rounds, success=True, e=0.07, n=200_000):
    return ExecutionRecord(n, 0.6, 0.1, p, s, rounds, success, e)


def test_aggregate_single_record():
    agg = aggregate([_rec(9_600, 10_400, 3)])
    assert agg.m == 1 and agg.n_hat == 3
    assert (agg.p_hat, agg.s_hat) == (9_600, 10_400)
    assert agg.pi_hat == pytest.approx(0.048) and agg.sigma_hat == pytest.approx(0.052)
    assert agg.f_hat == pytest.approx(execution_efficiency(0.6, 0.1, 0.048, 0.07))
    assert agg.fer == 0


def test_aggregate_means():
    agg = aggregate([_rec(4_000, 16_000, 1), _rec(8_000, 12_000, 2)])
    assert agg.pi_hat == pytest.approx(0.03)
    assert agg.n_hat == pytest.approx(1.5)
    assert abs(agg.p_hat / 200_000 - agg.pi_hat) <= 1 / 200_000


def test_aggregate_table_row_070():
    # pi_hat = 0.0480 -> f_hat = 1.06883
    records = [_rec(9_600, 10_400, 3) for _ in range(10)]
    assert aggregate(records).f_hat == pytest.approx(1.06883, abs=5e-4)


def test_aggregate_failures():
    records = [_rec(0, 20_000, 6, success=False) for _ in range(4)]
    agg = aggregate(records)
    assert agg.pi_hat is None and agg.sigma_hat is None and agg.f_hat is None
    assert agg.fer == 1.0 and agg.n_hat == 6 and agg.s_hat == 20_000
    mixed = aggregate(records + [_rec(3_333, 16_667, 5)])
    assert mixed.fer == pytest.approx(0.8)
    assert mixed.pi_hat == pytest.approx(3_333 / 200_000)


def test_aggregate_rejects_empty_or_mixed():
    with pytest.raises(ValueError):
        aggregate([])
    with pytest.raises(ValueError):
        aggregate([_rec(1, 1, 0, e=0.07), _rec(1, 1, 0, e=0.08)])


def test_aggregate_permutation_invariant():
    recs = [_rec(20_000 - k * 3_334, k * 3_334, k, success=k < 5) for k in range(6)]
    base = aggregate(recs)
    for perm in itertools.islice(itertools.permutations(recs), 50):
        agg = aggregate(perm)
        for field in ("n_hat", "p_hat", "s_hat", "pi_hat", "sigma_hat", "f_hat", "fer"):
            assert math.isclose(getattr(agg, field), getattr(base, field), rel_tol=1e-15)
