"""Trusted entanglement source, measurement shortcut and a statevector oracle.

Measuring one half of a |Phi+> pair in the computational basis yields the
same uniform bit on both sides, and measuring |+> yields an independent
uniform bit.  :func:`distribute` uses that fact directly and never touches
amplitudes.  The oracle functions below simulate the actual two-qubit
states so tests can confirm the shortcut.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError
from .sequences import IndexSet, TupleSequence, index_set

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_I = np.eye(2, dtype=complex)
# control = first (Alice) qubit, basis order |ab> -> 2a + b
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)

BELL_OUTCOMES = ("00", "01", "10", "11")
PLUS_OUTCOMES = ("0", "1")


class BellState(Enum):
    PHI_PLUS = (0, 0)
    PHI_MINUS = (1, 0)
    PSI_PLUS = (0, 1)
    PSI_MINUS = (1, 1)

    @property
    def cli_name(self) -> str:
        return {
            BellState.PHI_PLUS: "phi+",
            BellState.PHI_MINUS: "phi-",
            BellState.PSI_PLUS: "psi+",
            BellState.PSI_MINUS: "psi-",
        }[self]

    @classmethod
    def from_name(cls, name: str) -> "BellState":
        for state in cls:
            if state.cli_name == name.lower():
                return state
        raise ValueError(f"unknown Bell state {name!r}")


def bell_statevector(state: BellState) -> np.ndarray:
    """Prepare |xy>, apply H to Alice's qubit, then CNOT Alice -> Bob."""
    x, y = state.value
    basis = np.zeros(4, dtype=complex)
    basis[2 * x + y] = 1.0
    return _CNOT @ np.kron(_H, _I) @ basis


def plus_statevector() -> np.ndarray:
    return _H @ np.array([1.0, 0.0], dtype=complex)


def bell_weights(state: BellState) -> dict[str, float]:
    amps = bell_statevector(state)
    return {o: float(abs(a) ** 2) for o, a in zip(BELL_OUTCOMES, amps)}


def plus_weights() -> dict[str, float]:
    amps = plus_statevector()
    return {o: float(abs(a) ** 2) for o, a in zip(PLUS_OUTCOMES, amps)}


def _check_shots(shots: int) -> None:
    if int(shots) != shots or shots < 1:
        raise ValueError(f"shots must be a positive integer, got {shots!r}")


def _sample(amps: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    probs = np.abs(amps) ** 2
    probs = probs / probs.sum()
    return rng.choice(len(amps), size=shots, p=probs)


def sample_bell(state: BellState, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Per-shot joint outcomes as an ``(shots, 2)`` array of (alice, bob) bits."""
    _check_shots(shots)
    idx = _sample(bell_statevector(state), shots, rng)
    return np.stack([idx >> 1, idx & 1], axis=1).astype(np.int8)


def oracle_measure_bell(state: BellState, shots: int, rng: np.random.Generator) -> dict[str, int]:
    _check_shots(shots)
    idx = _sample(bell_statevector(state), shots, rng)
    counts = np.bincount(idx, minlength=4)
    return {o: int(c) for o, c in zip(BELL_OUTCOMES, counts)}


def oracle_measure_plus(shots: int, rng: np.random.Generator) -> dict[str, int]:
    _check_shots(shots)
    idx = _sample(plus_statevector(), shots, rng)
    counts = np.bincount(idx, minlength=2)
    return {o: int(c) for o, c in zip(PLUS_OUTCOMES, counts)}


def histogram_csv(state_name: str, histogram: dict, header: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header:
        writer.writerow(["state", "outcome", "count"])
    for outcome, count in histogram.items():
        writer.writerow([state_name, outcome, count])
    return buf.getvalue()


@dataclass(frozen=True)
class NoiseModel:
    """Independent bit flips on each aggregator's entangled-position bits."""

    epsilon: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ConfigurationError(f"noise epsilon must lie in [0, 1), got {self.epsilon}")


@dataclass(frozen=True)
class DistributionResult:
    alice_bits: TupleSequence
    bob_bits: tuple[TupleSequence, ...]
    reserve: int = 0

    @property
    def n(self) -> int:
        return self.alice_bits.n

    @property
    def d(self) -> int:
        """Tuples available to the protocol (reserved ones excluded)."""
        return self.alice_bits.d - self.reserve

    @property
    def reserved_indices(self) -> IndexSet:
        total = self.alice_bits.d
        return frozenset(range(self.d + 1, total + 1))

    def bob(self, k: int) -> TupleSequence:
        return self.bob_bits[k - 1]

    def protocol_part(self) -> "DistributionResult":
        """Drop the tuples spent on entanglement validation."""
        if self.reserve == 0:
            return self
        d = self.d
        return DistributionResult(
            TupleSequence._wrap(self.alice_bits.cells[:d]),
            tuple(TupleSequence._wrap(b.cells[:d]) for b in self.bob_bits),
        )


def check_accuracy_degree(d: int) -> None:
    if int(d) != d or d < 4 or d % 4:
        raise ConfigurationError(f"accuracy degree d must be a multiple of 4 and >= 4, got {d}")


def distribute(
    n: int,
    d: int,
    noise: NoiseModel,
    rng: np.random.Generator,
    reserve: int = 0,
) -> DistributionResult:
    """Measured bit sequences for one verifier and her ``n`` aggregators.

    ``reserve`` extra tuples are appended after the ``d`` protocol tuples and
    are meant to be consumed by :func:`validate_entanglement`.
    """
    if int(n) != n or n < 2:
        raise ConfigurationError(f"an active network needs at least 2 aggregators, got {n}")
    check_accuracy_degree(d)
    if reserve < 0:
        raise ConfigurationError("reserve must be non-negative")
    total = d + reserve
    alice = rng.integers(0, 2, size=(total, n), dtype=np.int8)
    bobs = []
    for k in range(n):
        # |+> positions: independent uniform bits
        bob = rng.integers(0, 2, size=(total, n), dtype=np.int8)
        flips = (rng.random(total) < noise.epsilon).astype(np.int8)
        bob[:, k] = alice[:, k] ^ flips
        bobs.append(TupleSequence._wrap(bob))
    return DistributionResult(TupleSequence._wrap(alice), tuple(bobs), reserve)


@dataclass(frozen=True)
class ValidationReport:
    position: int
    sampled_pairs: int
    mismatches: int
    threshold: float

    @property
    def estimated_error_rate(self) -> float:
        return self.mismatches / self.sampled_pairs

    @property
    def passed(self) -> bool:
        return self.estimated_error_rate <= self.threshold


def validate_entanglement(
    result: DistributionResult,
    k: int,
    sample: Iterable[int],
    threshold: float,
) -> ValidationReport:
    """Compare Alice's and Bob_k's bits at position ``k`` over sacrificed tuples."""
    indices = sorted(index_set(sample, result.alice_bits.d))
    if not indices:
        raise ValueError("validation sample is empty")
    rows = np.asarray(indices) - 1
    a = result.alice_bits.column(k)[rows]
    b = result.bob(k).column(k)[rows]
    return ValidationReport(k, len(rows), int(np.count_nonzero(a != b)), threshold)


def validate_all(
    result: DistributionResult, threshold: float, sample: Sequence[int] | None = None
) -> list[ValidationReport]:
    sample = result.reserved_indices if sample is None else sample
    return [validate_entanglement(result, k, sample, threshold) for k in range(1, result.n + 1)]
