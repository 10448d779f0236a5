import numpy as np
import pytest

from ldpc_reconcile.ldpc_core import DEFAULT_DISTRIBUTION, REGULAR_3_6, ParityCheckMatrix, build_peg_code

# 6x12 regular (3,6) code: distinct columns, so every single-bit error has its own syndrome.
HAND_H = np.array([
    [1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0],
    [1, 1, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0],
    [1, 0, 0, 0, 1, 1, 0, 0, 1, 1, 1, 0],
    [0, 1, 0, 0, 1, 0, 1, 0, 1, 1, 0, 1],
    [0, 0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 1],
    [0, 0, 0, 1, 0, 0, 1, 1, 0, 1, 1, 1],
], dtype=np.uint8)


@pytest.fixture(scope="session")
def hand_code():
    return ParityCheckMatrix.from_dense(HAND_H)


@pytest.fixture(scope="session")
def desk_code():
    """The default desk-scale mother code: n=2000, rate 0.6."""
    return build_peg_code(2000, DEFAULT_DISTRIBUTION, 7)


@pytest.fixture(scope="session")
def code_3_6():
    return build_peg_code(1200, REGULAR_3_6, 1)
