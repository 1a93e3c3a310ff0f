"""Synchronous, loss-free message delivery between the actors of a round.

Actors are named by short labels: ``A{i}`` for the verifier coordinating
active network ``i`` and ``B{i}.{k}`` for the aggregator at position ``k``
of that network.  Delivery inside a phase is ordered by (receiver, sender)
so every run with the same seed produces the same transcript.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import ConfigurationError, HarnessError
from .sequences import TupleSequence

PHASES = ("distribution", "validation", "coordinator-send", "peer-exchange", "decision")
PROTOCOL_PHASES = PHASES[2:]


def verifier_id(i: int) -> str:
    return f"A{i}"


def aggregator_id(i: int, k: int) -> str:
    return f"B{i}.{k}"


def parse_actor(label: str) -> tuple[str, int, int | None]:
    """``'B2.3' -> ('B', 2, 3)``, ``'A2' -> ('A', 2, None)``."""
    kind, rest = label[0], label[1:]
    if kind == "A":
        return kind, int(rest), None
    if kind == "B":
        i, k = rest.split(".")
        return kind, int(i), int(k)
    raise ValueError(f"not an actor label: {label!r}")


def position_of(label: str) -> int:
    return parse_actor(label)[2]


def network_of(label: str) -> int:
    return parse_actor(label)[1]


@dataclass(frozen=True)
class OutcomeMessage:
    """A verification outcome and the proof that should back it."""

    sender: str
    receiver: str
    c: int
    proof: TupleSequence
    phase: str = "coordinator-send"

    def digest(self) -> str:
        d, n = self.proof.shape
        h = hashlib.sha256(f"{self.c}:{d}x{n}:".encode() + self.proof.cells.tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class ActiveNetwork:
    index: int
    size: int

    @property
    def coordinator(self) -> str:
        return verifier_id(self.index)

    @property
    def aggregators(self) -> list[str]:
        return [aggregator_id(self.index, k) for k in range(1, self.size + 1)]


@dataclass(frozen=True)
class Topology:
    networks: tuple[ActiveNetwork, ...]

    def __post_init__(self):
        seen = set()
        for net in self.networks:
            if net.size < 2:
                raise ConfigurationError(
                    f"active network {net.index} has {net.size} aggregators; at least 2 are needed"
                )
            if net.index in seen:
                raise ConfigurationError(f"duplicate verifier index {net.index}")
            seen.add(net.index)

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "Topology":
        if not sizes:
            raise ConfigurationError("topology needs at least one active network")
        return cls(tuple(ActiveNetwork(i, int(n)) for i, n in enumerate(sizes, start=1)))

    @property
    def m(self) -> int:
        return len(self.networks)


@dataclass(frozen=True)
class TranscriptEntry:
    phase: str
    sender: str
    receiver: str
    digest: str
    status: str = "delivered"

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "sender": self.sender,
            "receiver": self.receiver,
            "digest": self.digest,
            "status": self.status,
        }


@dataclass
class Transcript:
    entries: list[TranscriptEntry] = field(default_factory=list)

    def record(self, phase: str, sender: str, receiver: str, digest: str, status: str = "delivered"):
        if phase not in PHASES:
            raise HarnessError(f"unknown phase {phase!r}")
        if self.entries and PHASES.index(phase) < PHASES.index(self.entries[-1].phase):
            raise HarnessError(f"phase {phase!r} recorded after {self.entries[-1].phase!r}")
        self.entries.append(TranscriptEntry(phase, sender, receiver, digest, status))

    def phases(self) -> list[str]:
        out = []
        for e in self.entries:
            if not out or out[-1] != e.phase:
                out.append(e.phase)
        return out

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_dict(), sort_keys=True) + "\n" for e in self.entries)


def _actor_network(label: str) -> int | None:
    try:
        return network_of(label)
    except (ValueError, IndexError):
        return None


@dataclass(frozen=True)
class PhaseDelivery:
    delivered: tuple[OutcomeMessage, ...]
    dropped: tuple[OutcomeMessage, ...]

    @property
    def sent(self) -> int:
        return len(self.delivered) + len(self.dropped)


def deliver_phase(
    pending: Iterable[OutcomeMessage],
    blocked: Mapping[str, Iterable[str]] | None = None,
    transcript: Transcript | None = None,
) -> PhaseDelivery:
    """Order one phase's messages and drop those a reputation list forbids.

    ``blocked`` maps an actor to the labels on its M_A list.  A message is
    dropped when its sender is on the receiver's list or its receiver is on
    the sender's list.
    """
    pending = list(pending)
    blocked = {a: set(v) for a, v in (blocked or {}).items()}
    phases = {m.phase for m in pending}
    if len(phases) > 1:
        raise HarnessError(f"messages from several phases in one delivery: {sorted(phases)}")
    pairs = set()
    for m in pending:
        if (m.sender, m.receiver) in pairs:
            raise HarnessError(f"duplicate message {m.sender} -> {m.receiver} in one phase")
        if _actor_network(m.sender) != _actor_network(m.receiver):
            raise HarnessError(f"cross-network message {m.sender} -> {m.receiver}")
        pairs.add((m.sender, m.receiver))

    def order(m: OutcomeMessage):
        return (_sort_key(m.receiver), _sort_key(m.sender))

    delivered, dropped = [], []
    for m in sorted(pending, key=order):
        if m.sender in blocked.get(m.receiver, ()) or m.receiver in blocked.get(m.sender, ()):
            dropped.append(m)
            status = "dropped"
        else:
            delivered.append(m)
            status = "delivered"
        if transcript is not None:
            transcript.record(m.phase, m.sender, m.receiver, m.digest(), status)
    return PhaseDelivery(tuple(delivered), tuple(dropped))


def _sort_key(label: str):
    try:
        kind, i, k = parse_actor(label)
    except (ValueError, IndexError):
        return ("~", 0, 0, label)
    return (kind, i, k or 0, label)
