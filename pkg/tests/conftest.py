from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import strategies as st

from qnva.sequences import CRYPTIC, TupleSequence


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@st.composite
def bit_sequences(draw, min_d=1, max_d=24, min_n=2, max_n=6):
    d = draw(st.integers(min_d, max_d))
    n = draw(st.integers(min_n, max_n))
    flat = draw(st.lists(st.integers(0, 1), min_size=d * n, max_size=d * n))
    return TupleSequence(np.array(flat, dtype=np.int8).reshape(d, n))


@st.composite
def proof_sequences(draw, min_d=1, max_d=24, min_n=2, max_n=6):
    bits = draw(bit_sequences(min_d, max_d, min_n, max_n))
    hide = draw(st.lists(st.booleans(), min_size=bits.d, max_size=bits.d))
    cells = bits.cells.copy()
    cells[np.array(hide, dtype=bool)] = CRYPTIC
    return TupleSequence(cells)


def seq(rows):
    """Build a sequence from a list of tuples, each a string like '01*'."""
    return TupleSequence([[{"0": 0, "1": 1, "*": CRYPTIC}[ch] for ch in row] for row in rows])


def honest_alice_failure(d, n, tol):
    """Exact probability that an honest proof fails the coordinator test.

    Given N tuples carrying c at position k, each other position splits them
    Binomial(N, 1/2) independently, so the balance gate passes with q(N)**(n-1).
    """
    total = Fraction(0)
    for big_n in range(d + 1):
        p_n = Fraction(comb(d, big_n), 2**d)
        if not tol.count_ok(big_n, d, 0.5):
            total += p_n
            continue
        q = sum(
            Fraction(comb(big_n, x), 2**big_n)
            for x in range(big_n + 1)
            if tol.count_ok(x, d, 0.25) and tol.count_ok(big_n - x, d, 0.25)
        )
        total += p_n * (1 - q ** (n - 1))
    return float(total)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
