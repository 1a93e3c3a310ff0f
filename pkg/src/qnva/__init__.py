"""Simulator for entanglement-backed news verification across active networks."""
from .checks import (
    FailureReason,
    TestResult,
    TolerancePolicy,
    is_alice_proof_consistent,
    is_bob_proof_consistent,
    is_proof_balanced,
)
from .config import ScenarioConfig
from .errors import (
    ConfigurationError,
    DegenerateForgeError,
    HarnessError,
    MalformedSequenceError,
    ProtocolError,
    QNVAError,
)
from .experiments import (
    analytic_cheat_probability,
    detection_rate,
    estimate_forge_success,
    expected_counts_experiment,
    forge_success_probability,
    table1,
)
from .network import OutcomeMessage, Topology, Transcript, deliver_phase
from .proofs import ForgeStrategy, build_proof, forge_proof
from .protocol import (
    AggregatorBehavior,
    Decision,
    NetworkBehavior,
    RoundSettings,
    VerifierBehavior,
    qnva_step,
    run_round,
)
from .quantum import BellState, NoiseModel, distribute, oracle_measure_bell, oracle_measure_plus
from .sequences import CRYPTIC, Symbol, TupleSequence

__version__ = "0.1.0"

__all__ = [
    "AggregatorBehavior",
    "BellState",
    "CRYPTIC",
    "ConfigurationError",
    "Decision",
    "DegenerateForgeError",
    "FailureReason",
    "ForgeStrategy",
    "HarnessError",
    "MalformedSequenceError",
    "NetworkBehavior",
    "NoiseModel",
    "OutcomeMessage",
    "ProtocolError",
    "QNVAError",
    "RoundSettings",
    "ScenarioConfig",
    "Symbol",
    "TestResult",
    "TolerancePolicy",
    "Topology",
    "Transcript",
    "TupleSequence",
    "VerifierBehavior",
    "analytic_cheat_probability",
    "build_proof",
    "deliver_phase",
    "detection_rate",
    "distribute",
    "estimate_forge_success",
    "expected_counts_experiment",
    "forge_proof",
    "forge_success_probability",
    "is_alice_proof_consistent",
    "is_bob_proof_consistent",
    "is_proof_balanced",
    "oracle_measure_bell",
    "oracle_measure_plus",
    "qnva_step",
    "run_round",
    "table1",
]
