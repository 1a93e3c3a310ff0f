"""The balance test and the two consistency tests an aggregator runs.

Each test is a sequence of gates evaluated in a fixed order; the first
failing gate determines :attr:`TestResult.failure_reason`.  Count gates
accept a value inside ``mean +/- z * sd`` (inclusive) unless the policy is
strict, in which case they require the exact expectation.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import MalformedSequenceError
from .sequences import TupleSequence


class FailureReason(Enum):
    COUNT_OFF_K = "CountOffK"
    BIT_MISMATCH = "BitMismatch"
    UNBALANCED = "Unbalanced"
    COUNT_OFF_K_PRIME = "CountOffKPrime"
    SET_MISMATCH = "SetMismatch"
    MALFORMED = "Malformed"
    NONE = "None"


@dataclass(frozen=True)
class TolerancePolicy:
    """How far observed counts may stray from their expectations.

    ``mismatch_budget=None`` derives the bit-mismatch allowance from
    ``epsilon``: zero for a noiseless channel, otherwise
    ``epsilon + z_count * sqrt(epsilon * (1 - epsilon) / revealed)``.
    """

    z_count: float = 4.0
    mismatch_budget: float | None = None
    set_diff_budget: int = 0
    epsilon: float = 0.0
    strict: bool = False

    def __post_init__(self):
        if not self.z_count > 0:
            raise ValueError("z_count must be positive")
        if self.mismatch_budget is not None and self.mismatch_budget < 0:
            raise ValueError("mismatch_budget must be non-negative")
        if self.set_diff_budget < 0:
            raise ValueError("set_diff_budget must be non-negative")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")

    def count_ok(self, count: int, d: int, p: float) -> bool:
        """``count`` against a Binomial(d, p) expectation."""
        mean = d * p
        if self.strict:
            return count == mean
        return abs(count - mean) <= self.z_count * math.sqrt(d * p * (1 - p))

    def mismatch_allowance(self, revealed: int) -> float:
        if self.strict:
            return 0.0
        if self.mismatch_budget is not None:
            return self.mismatch_budget
        eps = self.epsilon
        if eps == 0.0 or revealed == 0:
            return eps
        return eps + self.z_count * math.sqrt(eps * (1 - eps) / revealed)

    def set_allowance(self) -> int:
        return 0 if self.strict else self.set_diff_budget


@dataclass(frozen=True)
class TestResult:
    __test__ = False  # keep pytest from collecting this class

    passed: bool
    failure_reason: FailureReason
    observed: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.passed != (self.failure_reason is FailureReason.NONE):
            raise ValueError("passed must coincide with failure_reason == NONE")

    def __bool__(self):
        return self.passed

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "failure_reason": self.failure_reason.value,
            "observed": self.observed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _ok(observed) -> TestResult:
    return TestResult(True, FailureReason.NONE, observed)


def _fail(reason: FailureReason, observed) -> TestResult:
    return TestResult(False, reason, observed)


def _revealed(proof: TupleSequence) -> np.ndarray | None:
    try:
        return ~proof.cryptic_mask()
    except MalformedSequenceError:
        return None


def _balance(k: int, c: int, proof: TupleSequence, tol: TolerancePolicy, observed: dict) -> TestResult:
    d, n = proof.shape
    at_k = proof.column(k) == c
    counts = {}
    for r in range(1, n + 1):
        if r == k:
            continue
        col = proof.column(r)
        same = int(np.count_nonzero(at_k & (col == c)))
        opposite = int(np.count_nonzero(at_k & (col == 1 - c)))
        counts[r] = (same, opposite)
        if not (tol.count_ok(same, d, 0.25) and tol.count_ok(opposite, d, 0.25)):
            observed["balance"] = counts
            observed["unbalanced_position"] = r
            return _fail(FailureReason.UNBALANCED, observed)
    observed["balance"] = counts
    return _ok(observed)


def is_proof_balanced(k: int, c: int, proof: TupleSequence, tol: TolerancePolicy) -> TestResult:
    """Every other position splits the ``c``-tuples evenly, about d/4 each way."""
    proof.column(k)
    if _revealed(proof) is None:
        return _fail(FailureReason.MALFORMED, {})
    return _balance(k, c, proof, tol, {})


def is_alice_proof_consistent(
    k: int,
    c: int,
    proof: TupleSequence,
    bob_bits: TupleSequence,
    tol: TolerancePolicy,
) -> TestResult:
    """Aggregator ``k`` checks the coordinator's proof against his own bits.

    Gates: (1) about d/2 tuples carry ``c`` at position ``k``; (2) every
    revealed tuple carries ``c`` there and agrees with Bob's entangled bit,
    up to the mismatch allowance; (3) the proof is balanced.
    """
    if proof.shape != bob_bits.shape:
        raise ValueError(f"shape mismatch {proof.shape} vs {bob_bits.shape}")
    revealed = _revealed(proof)
    if revealed is None:
        return _fail(FailureReason.MALFORMED, {})
    d = proof.d
    col = proof.column(k)
    at_c = col == c
    count = int(np.count_nonzero(at_c))
    observed = {"count_k": count}
    if not tol.count_ok(count, d, 0.5):
        return _fail(FailureReason.COUNT_OFF_K, observed)

    # a consistent proof never reveals a tuple holding the opposite bit
    off_branch = int(np.count_nonzero(revealed & ~at_c))
    mismatches = int(np.count_nonzero(at_c & (bob_bits.column(k) != c)))
    observed["off_branch"] = off_branch
    observed["mismatches"] = mismatches
    if off_branch:
        return _fail(FailureReason.BIT_MISMATCH, observed)
    if count and mismatches / count > tol.mismatch_allowance(count):
        return _fail(FailureReason.BIT_MISMATCH, observed)

    return _balance(k, c, proof, tol, observed)


def is_bob_proof_consistent(
    k: int,
    k_peer: int,
    c: int,
    proof_k: TupleSequence,
    claimed: int,
    proof_peer: TupleSequence,
    tol: TolerancePolicy,
) -> TestResult:
    """Aggregator ``k`` checks a peer's proof for the opposite outcome.

    Gates: (1) about d/2 tuples carry ``claimed`` at the peer's position;
    (2) both proofs agree on which tuples hold ``c`` at ``k`` and ``claimed``
    at ``k_peer``; (3) the peer's proof is balanced.
    """
    if claimed != 1 - c:
        raise ValueError("the peer's claimed outcome must be the opposite of c")
    if k == k_peer:
        raise ValueError("peer position must differ from k")
    if proof_k.shape != proof_peer.shape:
        raise ValueError(f"shape mismatch {proof_k.shape} vs {proof_peer.shape}")
    if _revealed(proof_k) is None or _revealed(proof_peer) is None:
        return _fail(FailureReason.MALFORMED, {})
    d = proof_peer.d
    count = int(np.count_nonzero(proof_peer.column(k_peer) == claimed))
    observed = {"count_k_prime": count}
    if not tol.count_ok(count, d, 0.5):
        return _fail(FailureReason.COUNT_OFF_K_PRIME, observed)

    own = (proof_k.column(k) == c) & (proof_k.column(k_peer) == claimed)
    peer = (proof_peer.column(k) == c) & (proof_peer.column(k_peer) == claimed)
    diff = int(np.count_nonzero(own != peer))
    observed["set_difference"] = diff
    if diff > tol.set_allowance():
        return _fail(FailureReason.SET_MISMATCH, observed)

    return _balance(k_peer, claimed, proof_peer, tol, observed)
