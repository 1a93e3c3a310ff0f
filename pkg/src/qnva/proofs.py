"""Honest proof sequences and the forgeries a cheating aggregator can build."""
from __future__ import annotations

from enum import Enum
from typing import Iterable

import numpy as np

from .errors import DegenerateForgeError
from .sequences import CRYPTIC, TupleSequence


class ForgeStrategy(Enum):
    UNIFORM_GUESS = "uniform"
    EXACT_COUNT_GUESS = "exact_count"

    @classmethod
    def parse(cls, value) -> "ForgeStrategy":
        if isinstance(value, cls):
            return value
        for s in cls:
            if value in (s.value, s.name, s.name.lower()):
                return s
        raise ValueError(f"unknown forge strategy {value!r}")


def _check_bit(c: int) -> None:
    if c not in (0, 1):
        raise ValueError(f"verification outcome must be 0 or 1, got {c!r}")


def build_proof(alice_bits: TupleSequence, k: int, c: int) -> TupleSequence:
    """Reveal Alice's tuple ``l`` when her bit at position ``k`` equals ``c``."""
    _check_bit(c)
    if alice_bits.has_cryptic():
        raise ValueError("alice_bits must be a measured bit sequence")
    keep = alice_bits.column(k) == c
    cells = np.where(keep[:, None], alice_bits.cells, np.int8(CRYPTIC))
    return TupleSequence._wrap(cells)


def forge_proof(
    received_proof: TupleSequence,
    k_forger: int,
    claimed_outcome: int,
    strategy: ForgeStrategy,
    rng: np.random.Generator,
    attacked: Iterable[int] | None = None,
) -> TupleSequence:
    """Proof claiming ``claimed_outcome`` built without Alice's hidden tuples.

    The forger knows his received proof was built for the opposite outcome,
    so its cryptic tuples are exactly those carrying ``claimed_outcome`` at
    his position.  He reveals those and hides the rest; every other cell of a
    revealed tuple is a guess.  ``attacked`` lists the positions that get the
    exact-count placement (default: all positions but the forger's).
    """
    _check_bit(claimed_outcome)
    d, n = received_proof.shape
    if not 1 <= k_forger <= n:
        raise ValueError(f"position {k_forger} outside 1..{n}")
    hidden = received_proof.cryptic_mask()
    rows = np.flatnonzero(hidden)
    target = 1 - claimed_outcome
    cells = np.full((d, n), CRYPTIC, dtype=np.int8)
    cells[rows, k_forger - 1] = claimed_outcome
    others = [r for r in range(1, n + 1) if r != k_forger]
    attacked = set(others if attacked is None else attacked)

    quota = d // 4
    if strategy is ForgeStrategy.EXACT_COUNT_GUESS and attacked and rows.size < quota:
        raise DegenerateForgeError(
            f"only {rows.size} cryptic tuples, cannot place {quota} target bits"
        )
    for r in others:
        if strategy is ForgeStrategy.EXACT_COUNT_GUESS and r in attacked:
            col = np.full(rows.size, claimed_outcome, dtype=np.int8)
            col[rng.choice(rows.size, size=quota, replace=False)] = target
        else:
            col = rng.integers(0, 2, size=rows.size, dtype=np.int8)
        cells[rows, r - 1] = col
    return TupleSequence._wrap(cells)


def is_consistent_oracle(proof: TupleSequence, alice_bits: TupleSequence, k: int, c: int) -> bool:
    """Ground truth: does ``proof`` equal the honest construction cell for cell?"""
    if proof.shape != alice_bits.shape:
        raise ValueError(f"shape mismatch {proof.shape} vs {alice_bits.shape}")
    return proof == build_proof(alice_bits, k, c)
