"""Per-aggregator state machine, actor behaviors and round orchestration.

Each aggregator runs the same five steps: receive the coordinator's outcome
and proof, test it against his own bits, forward it to his peers, collect
theirs, and resolve any conflicting outcome with the cross-check.  A failed
coordinator test or a passed cross-check blames the coordinator (M_V); a
failed cross-check blames the peer (M_A).
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from enum import Enum
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .checks import (
    TolerancePolicy,
    is_alice_proof_consistent,
    is_bob_proof_consistent,
)
from .errors import ConfigurationError, ProtocolError
from .network import (
    ActiveNetwork,
    OutcomeMessage,
    Topology,
    Transcript,
    aggregator_id,
    deliver_phase,
    position_of,
    verifier_id,
)
from .proofs import ForgeStrategy, build_proof, forge_proof
from .quantum import NoiseModel, check_accuracy_degree, distribute, validate_all
from .sequences import TupleSequence


class Decision(Enum):
    UNDECIDED = "Undecided"
    ACCEPT_TRUE = "AcceptTrue"
    ACCEPT_FAKE = "AcceptFake"
    REJECT_FAKE_BLAME_VERIFIER = "RejectFakeBlameVerifier"


class Stage(Enum):
    AWAITING = "awaiting"
    EXCHANGING = "exchanging"
    REJECTED = "rejected"  # coordinator test failed; later peer traffic is ignored
    DECIDED = "decided"


# ---------------------------------------------------------------- behaviors


@dataclass(frozen=True)
class VerifierBehavior:
    """What the coordinator sends.

    ``honest``: outcome ``c`` with the matching proof to everyone.
    ``inconsistent``: ``c`` to everyone, but the aggregators in ``targets``
    get the proof built for the opposite outcome.
    ``contradictory``: ``c`` to ``targets`` and the opposite outcome to the
    rest, each with a correctly built proof.
    """

    kind: str = "honest"
    c: int = 1
    targets: frozenset = frozenset({1})

    KINDS = ("honest", "inconsistent", "contradictory")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ConfigurationError(f"unknown verifier behavior {self.kind!r}")
        if self.c not in (0, 1):
            raise ConfigurationError("verifier outcome must be 0 or 1")
        object.__setattr__(self, "targets", frozenset(int(t) for t in self.targets))

    @classmethod
    def honest(cls, c: int = 1) -> "VerifierBehavior":
        return cls("honest", c)

    @classmethod
    def inconsistent(cls, c: int = 1, victims=(1,)) -> "VerifierBehavior":
        return cls("inconsistent", c, frozenset(victims))

    @classmethod
    def contradictory(cls, c: int = 1, targets=(1,)) -> "VerifierBehavior":
        return cls("contradictory", c, frozenset(targets))


@dataclass(frozen=True)
class AggregatorBehavior:
    kind: str = "honest"
    strategy: ForgeStrategy = ForgeStrategy.EXACT_COUNT_GUESS

    def __post_init__(self):
        if self.kind not in ("honest", "forger"):
            raise ConfigurationError(f"unknown aggregator behavior {self.kind!r}")

    @classmethod
    def forger(cls, strategy=ForgeStrategy.EXACT_COUNT_GUESS) -> "AggregatorBehavior":
        return cls("forger", ForgeStrategy.parse(strategy))


HONEST_AGGREGATOR = AggregatorBehavior()


@dataclass(frozen=True)
class NetworkBehavior:
    verifier: VerifierBehavior = field(default_factory=VerifierBehavior)
    aggregators: Mapping[int, AggregatorBehavior] = field(default_factory=dict)

    def aggregator(self, k: int) -> AggregatorBehavior:
        return self.aggregators.get(k, HONEST_AGGREGATOR)


def verifier_send(
    behavior: VerifierBehavior, alice_bits: TupleSequence, n: int, network: int = 1
) -> list[OutcomeMessage]:
    """One (outcome, proof) message per aggregator of the active network."""
    if alice_bits.n != n:
        raise ValueError(f"alice_bits has width {alice_bits.n}, network has {n} aggregators")
    sender = verifier_id(network)
    out = []
    for k in range(1, n + 1):
        c = behavior.c
        proof_for = c
        if behavior.kind == "inconsistent" and k in behavior.targets:
            proof_for = 1 - c
        elif behavior.kind == "contradictory" and k not in behavior.targets:
            c = proof_for = 1 - behavior.c
        out.append(OutcomeMessage(sender, aggregator_id(network, k), c, build_proof(alice_bits, k, proof_for)))
    return out


# ---------------------------------------------------------- state machine


@dataclass(frozen=True)
class Deliver:
    message: OutcomeMessage


@dataclass(frozen=True)
class DeliverPeer:
    message: OutcomeMessage


@dataclass(frozen=True)
class AllPeersDelivered:
    pass


@dataclass(frozen=True)
class AggregatorState:
    network: int
    k: int
    n: int
    own_bits: TupleSequence
    received: OutcomeMessage | None = None
    peer_msgs: Mapping[str, OutcomeMessage] = field(default_factory=lambda: MappingProxyType({}))
    m_a: frozenset = frozenset()
    m_v: frozenset = frozenset()
    decision: Decision = Decision.UNDECIDED
    stage: Stage = Stage.AWAITING
    checks: tuple = ()

    @property
    def id(self) -> str:
        return aggregator_id(self.network, self.k)

    @property
    def verifier(self) -> str:
        return verifier_id(self.network)

    @classmethod
    def initial(cls, network: int, k: int, own_bits: TupleSequence, m_a=(), m_v=()) -> "AggregatorState":
        return cls(network, k, own_bits.n, own_bits, m_a=frozenset(m_a), m_v=frozenset(m_v))


def _peer_messages(state: AggregatorState, msg: OutcomeMessage) -> list[OutcomeMessage]:
    out = []
    for k2 in range(1, state.n + 1):
        peer = aggregator_id(state.network, k2)
        if k2 == state.k or peer in state.m_a:
            continue
        out.append(OutcomeMessage(state.id, peer, msg.c, msg.proof, "peer-exchange"))
    return out


def qnva_step(state: AggregatorState, event, tol: TolerancePolicy):
    """Advance one aggregator by one event; returns ``(state, outbound)``."""
    if state.stage is Stage.DECIDED:
        raise ProtocolError(f"{state.id} already decided, got {type(event).__name__}")

    if isinstance(event, Deliver):
        if state.stage is not Stage.AWAITING:
            raise ProtocolError(f"{state.id} received a second coordinator message")
        msg = event.message
        if msg.sender != state.verifier or msg.receiver != state.id:
            raise ProtocolError(f"coordinator message {msg.sender} -> {msg.receiver} misrouted to {state.id}")
        result = is_alice_proof_consistent(state.k, msg.c, msg.proof, state.own_bits, tol)
        checks = state.checks + (("coordinator", state.verifier, result),)
        if not result.passed:
            return (
                replace(
                    state,
                    received=msg,
                    m_v=state.m_v | {state.verifier},
                    decision=Decision.REJECT_FAKE_BLAME_VERIFIER,
                    stage=Stage.REJECTED,
                    checks=checks,
                ),
                [],
            )
        new = replace(state, received=msg, stage=Stage.EXCHANGING, checks=checks)
        return new, _peer_messages(new, msg)

    if isinstance(event, DeliverPeer):
        if state.stage is Stage.AWAITING:
            raise ProtocolError(f"{state.id} got a peer message before the coordinator's")
        if state.stage is Stage.REJECTED:
            return state, []
        msg = event.message
        if msg.receiver != state.id or msg.sender == state.id:
            raise ProtocolError(f"peer message {msg.sender} -> {msg.receiver} misrouted to {state.id}")
        if msg.sender in state.m_a:
            raise ProtocolError(f"{msg.sender} is on {state.id}'s M_A list and should have been dropped")
        if msg.sender in state.peer_msgs:
            raise ProtocolError(f"second message from {msg.sender} to {state.id}")
        peers = dict(state.peer_msgs)
        peers[msg.sender] = msg
        return replace(state, peer_msgs=MappingProxyType(peers)), []

    if isinstance(event, AllPeersDelivered):
        if state.stage is Stage.AWAITING:
            raise ProtocolError(f"{state.id} closed the exchange before hearing the coordinator")
        if state.stage is Stage.REJECTED:
            return replace(state, stage=Stage.DECIDED), []
        return _compare(state, tol), []

    raise ProtocolError(f"unknown event {event!r}")


def _compare(state: AggregatorState, tol: TolerancePolicy) -> AggregatorState:
    c = state.received.c
    own_proof = state.received.proof
    conflicts = sorted(
        (m for m in state.peer_msgs.values() if m.c != c),
        key=lambda m: position_of(m.sender),
    )
    m_a = set(state.m_a)
    checks = list(state.checks)
    for msg in conflicts:
        result = is_bob_proof_consistent(
            state.k, position_of(msg.sender), c, own_proof, msg.c, msg.proof, tol
        )
        checks.append(("peer", msg.sender, result))
        if result.passed:
            return replace(
                state,
                m_a=frozenset(m_a),
                m_v=state.m_v | {state.verifier},
                decision=Decision.REJECT_FAKE_BLAME_VERIFIER,
                stage=Stage.DECIDED,
                checks=tuple(checks),
            )
        m_a.add(msg.sender)
    verdict = Decision.ACCEPT_TRUE if c == 1 else Decision.ACCEPT_FAKE
    return replace(
        state, m_a=frozenset(m_a), decision=verdict, stage=Stage.DECIDED, checks=tuple(checks)
    )


# -------------------------------------------------------------- orchestration


@dataclass(frozen=True)
class RoundSettings:
    d: int = 16
    d_v: int | None = None  # None: d // 4
    noise: NoiseModel = NoiseModel()
    validation_threshold: float = 0.05
    tol: TolerancePolicy = TolerancePolicy()

    def __post_init__(self):
        check_accuracy_degree(self.d)
        if self.d_v is not None and self.d_v < 0:
            raise ConfigurationError("d_v must be non-negative")
        if not 0.0 <= self.validation_threshold <= 1.0:
            raise ConfigurationError("validation_threshold must lie in [0, 1]")

    @property
    def validation_tuples(self) -> int:
        return self.d // 4 if self.d_v is None else self.d_v


@dataclass
class NetworkOutcome:
    network: int
    aborted: bool
    states: list[AggregatorState]
    validation: list
    coordinator_messages: list[OutcomeMessage]
    messages_sent: int
    outbound_per_aggregator: dict[str, int]
    phases: int
    transcript: Transcript
    initial_m_a: dict[str, frozenset] = field(default_factory=dict)
    initial_m_v: dict[str, frozenset] = field(default_factory=dict)

    def state(self, k: int) -> AggregatorState:
        return self.states[k - 1]

    @property
    def decisions(self) -> list[Decision]:
        return [s.decision for s in self.states]

    def new_m_a(self, k: int) -> frozenset:
        s = self.state(k)
        return s.m_a - self.initial_m_a.get(s.id, frozenset())

    def new_m_v(self, k: int) -> frozenset:
        s = self.state(k)
        return s.m_v - self.initial_m_v.get(s.id, frozenset())

    def any_blame(self) -> bool:
        return any(self.new_m_a(k) or self.new_m_v(k) for k in range(1, len(self.states) + 1))

    def to_dict(self) -> dict:
        return {
            "network": self.network,
            "aborted": self.aborted,
            "decisions": [s.decision.value for s in self.states],
            "m_a": [sorted(s.m_a) for s in self.states],
            "m_v": [sorted(s.m_v) for s in self.states],
            "messages_sent": self.messages_sent,
            "phases": self.phases,
            "validation": [
                {
                    "position": r.position,
                    "sampled_pairs": r.sampled_pairs,
                    "mismatches": r.mismatches,
                    "passed": r.passed,
                }
                for r in self.validation
            ],
        }


@dataclass
class RoundOutcome:
    networks: list[NetworkOutcome]

    @property
    def aborted(self) -> bool:
        return any(n.aborted for n in self.networks)

    @property
    def messages_sent(self) -> int:
        return sum(n.messages_sent for n in self.networks)

    @property
    def phases(self) -> int:
        return max((n.phases for n in self.networks), default=0)

    def transcript_jsonl(self) -> str:
        return "".join(n.transcript.to_jsonl() for n in self.networks)

    def to_dict(self) -> dict:
        return {
            "aborted": self.aborted,
            "messages_sent": self.messages_sent,
            "phases": self.phases,
            "networks": [n.to_dict() for n in self.networks],
        }


def _bits_digest(seq: TupleSequence) -> str:
    return hashlib.sha256(seq.cells.tobytes()).hexdigest()[:16]


def run_network_round(
    net: ActiveNetwork,
    behavior: NetworkBehavior,
    settings: RoundSettings,
    rng: np.random.Generator,
    reputation: Mapping[str, tuple] | None = None,
) -> NetworkOutcome:
    """One verification round inside a single active network."""
    i, n, d = net.index, net.size, settings.d
    tol = settings.tol
    for k in behavior.aggregators:
        if not 1 <= k <= n:
            raise ConfigurationError(f"behavior assigned to aggregator {k}, network {i} has {n}")
    for k in behavior.verifier.targets:
        if behavior.verifier.kind != "honest" and not 1 <= k <= n:
            raise ConfigurationError(f"verifier target {k} outside network {i}")
    reputation = reputation or {}
    transcript = Transcript()

    dv = settings.validation_tuples
    dist = distribute(n, d, settings.noise, rng, reserve=dv)
    transcript.record("distribution", "source", net.coordinator, _bits_digest(dist.alice_bits))
    for k in range(1, n + 1):
        transcript.record("distribution", "source", aggregator_id(i, k), _bits_digest(dist.bob(k)))

    proto = dist.protocol_part()
    states = []
    for k in range(1, n + 1):
        m_a, m_v = reputation.get(aggregator_id(i, k), ((), ()))
        states.append(AggregatorState.initial(i, k, proto.bob(k), m_a, m_v))
    initial_m_a = {s.id: s.m_a for s in states}
    initial_m_v = {s.id: s.m_v for s in states}

    reports = []
    if dv:
        reports = validate_all(dist, settings.validation_threshold)
        for r in reports:
            transcript.record(
                "validation",
                net.coordinator,
                aggregator_id(i, r.position),
                f"{r.mismatches}/{r.sampled_pairs}",
                "passed" if r.passed else "failed",
            )
        if not all(r.passed for r in reports):
            return NetworkOutcome(i, True, states, reports, [], 0, {}, 0, transcript, initial_m_a, initial_m_v)

    coordinator_msgs = verifier_send(behavior.verifier, proto.alice_bits, n, i)
    delivery = deliver_phase(coordinator_msgs, transcript=transcript)
    phases = 1
    sent = delivery.sent
    outbound_counts = {s.id: 0 for s in states}

    peer_pending = []
    for msg in delivery.delivered:
        k = position_of(msg.receiver)
        state, out = qnva_step(states[k - 1], Deliver(msg), tol)
        states[k - 1] = state
        act = behavior.aggregator(k)
        if act.kind == "forger" and out:
            forged_c = 1 - msg.c
            forged = forge_proof(msg.proof, k, forged_c, act.strategy, rng)
            out = [replace(m, c=forged_c, proof=forged) for m in out]
        outbound_counts[state.id] = len(out)
        peer_pending.extend(out)

    blocked = {s.id: s.m_a for s in states}
    delivery = deliver_phase(peer_pending, blocked, transcript)
    phases += 1
    sent += delivery.sent
    for msg in delivery.delivered:
        k = position_of(msg.receiver)
        states[k - 1], _ = qnva_step(states[k - 1], DeliverPeer(msg), tol)

    for k in range(1, n + 1):
        states[k - 1], _ = qnva_step(states[k - 1], AllPeersDelivered(), tol)
        transcript.record("decision", states[k - 1].id, states[k - 1].id, states[k - 1].decision.value)
    phases += 1

    return NetworkOutcome(
        i,
        False,
        states,
        reports,
        coordinator_msgs,
        sent,
        outbound_counts,
        phases,
        transcript,
        initial_m_a,
        initial_m_v,
    )


def run_round(
    topology: Topology,
    behaviors: Sequence[NetworkBehavior],
    settings: RoundSettings,
    rng: np.random.Generator,
    reputation: Mapping[str, tuple] | None = None,
) -> RoundOutcome:
    """Run every active network once; networks never exchange messages."""
    if len(behaviors) != topology.m:
        raise ConfigurationError(f"{len(behaviors)} behaviors for {topology.m} active networks")
    return RoundOutcome(
        [run_network_round(net, b, settings, rng, reputation) for net, b in zip(topology.networks, behaviors)]
    )
