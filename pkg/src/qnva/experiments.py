"""Monte Carlo and exact reproductions of the detection guarantees.

Every trial draws from its own stream ``SeedSequence(seed, spawn_key=(t,))``
so a run's results never depend on how trials are split across workers.

Forge-success estimates come in two populations:

``physical``
    Alice's bits are honest uniform draws.  The forger must guess every
    hidden bit at the victim's position, so his chance is about
    ``E[2**-N]`` with ``N`` the number of hidden tuples.
``premise``
    Draws are conditioned on the counts taking their expected values
    (exactly d/2 hidden tuples, exactly d/4 of them holding the victim's
    outcome).  This is the setting in which the exact-count forger succeeds
    with probability ``1 / C(d/2, d/4)``.

:func:`forge_success_probability` enumerates both populations exactly and
serves as the reference for the simulated rates.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .checks import TolerancePolicy, is_bob_proof_consistent
from .errors import DegenerateForgeError
from .network import Topology, aggregator_id, verifier_id
from .proofs import ForgeStrategy, build_proof, forge_proof
from .protocol import (
    AggregatorBehavior,
    NetworkBehavior,
    RoundSettings,
    VerifierBehavior,
    run_round,
)
from .quantum import NoiseModel, check_accuracy_degree, distribute
from .sequences import TupleSequence

CSV_COLUMNS = ("scenario", "d", "n", "trials", "rate", "ci95", "analytic", "seed")
CONDITIONINGS = ("physical", "premise")
SCENARIOS = ("Honest", "S1", "S2", "S3")
TABLE_DEGREES = (4, 8, 16, 32, 64)

# d/2 and d/4 cells of the reference table as printed; two of them were
# typeset with integer division by 3 while the probability column is right.
PRINTED_TABLE_CELLS = {4: (2, 1), 8: (4, 2), 16: (8, 4), 32: (16, 10), 64: (21, 16)}


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def _run_chunk(func: Callable, seed: int, indices: Sequence[int]) -> list:
    return [func(trial_rng(seed, t)) for t in indices]


def run_trials(func: Callable, seed: int, trials: int, workers: int = 1, chunk: int = 2000) -> list:
    """``[func(rng_0), func(rng_1), ...]`` in trial order, optionally in parallel.

    ``func`` must be picklable when ``workers > 1``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if workers <= 1 or trials <= chunk:
        return _run_chunk(func, seed, range(trials))
    blocks = [range(s, min(s + chunk, trials)) for s in range(0, trials, chunk)]
    out = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(partial(_run_chunk, func, seed), blocks):
            out.extend(part)
    return out


# ------------------------------------------------------------------ reports


@dataclass
class EstimateReport:
    scenario: str
    d: int
    n: int
    trials: int
    successes: int
    seed: int
    analytic: float | None = None
    skipped: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def rate(self) -> float:
        return self.successes / self.trials if self.trials else float("nan")

    @property
    def ci95_halfwidth(self) -> float:
        if not self.trials:
            return float("nan")
        p = self.rate
        return 1.96 * math.sqrt(p * (1 - p) / self.trials)

    @property
    def sigma(self) -> float:
        """Binomial standard error around the analytic value (or the rate)."""
        p = self.rate if self.analytic is None else self.analytic
        return math.sqrt(p * (1 - p) / self.trials)

    def within_sigmas(self, k: float = 3.0) -> bool:
        if self.analytic is None:
            raise ValueError("no analytic reference to compare against")
        return abs(self.rate - self.analytic) <= k * self.sigma

    def row(self) -> list:
        return [
            self.scenario,
            self.d,
            self.n,
            self.trials,
            f"{self.rate:.8g}",
            f"{self.ci95_halfwidth:.8g}",
            "" if self.analytic is None else f"{self.analytic:.8g}",
            self.seed,
        ]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["rate"] = self.rate
        out["ci95_halfwidth"] = self.ci95_halfwidth
        return out


def reports_csv(reports: Sequence[EstimateReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in reports:
        writer.writerow(r.row())
    return buf.getvalue()


def reports_json(reports: Sequence[EstimateReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"


# ------------------------------------------------------------------ analytic


def cheat_probability_fraction(d: int) -> Fraction:
    check_accuracy_degree(d)
    return Fraction(1, math.comb(d // 2, d // 4))


def analytic_cheat_probability(d: int) -> float:
    """``1 / C(d/2, d/4)`` from exact integer binomials."""
    return float(cheat_probability_fraction(d))


def table1() -> list[dict]:
    rows = []
    for d in TABLE_DEGREES:
        printed = PRINTED_TABLE_CELLS[d]
        rows.append(
            {
                "d": d,
                "half": d // 2,
                "quarter": d // 4,
                "probability": analytic_cheat_probability(d),
                "printed_half": printed[0],
                "printed_quarter": printed[1],
                "printed_cells_consistent": printed == (d // 2, d // 4),
            }
        )
    return rows


def _binom_pmf(n: int, k: int) -> Fraction:
    return Fraction(math.comb(n, k), 2**n)


def forge_success_probability(
    d: int,
    strategy: ForgeStrategy = ForgeStrategy.EXACT_COUNT_GUESS,
    conditioning: str = "physical",
    tol: TolerancePolicy = TolerancePolicy(),
    n: int = 2,
) -> float:
    """Exact pass probability of the cross-check against a forged proof.

    Counts the hidden tuples ``N``, the victim-position ones ``X`` and the
    gates they must clear; degenerate exact-count draws (``N < d/4``) are
    excluded from the population, matching :func:`estimate_forge_success`.
    """
    check_accuracy_degree(d)
    if conditioning not in CONDITIONINGS:
        raise ValueError(f"conditioning must be one of {CONDITIONINGS}")
    quota = d // 4

    def balanced(count: int, hidden: int) -> bool:
        return tol.count_ok(count, d, 0.25) and tol.count_ok(hidden - count, d, 0.25)

    def other_positions(hidden: int) -> Fraction:
        # positions besides victim and forger, uniformly filled
        if strategy is ForgeStrategy.EXACT_COUNT_GUESS:
            return Fraction(1 if balanced(quota, hidden) else 0)
        p = sum(_binom_pmf(hidden, y) for y in range(hidden + 1) if balanced(y, hidden))
        return p

    def given_hidden(hidden: int, victim_counts) -> Fraction:
        if not tol.count_ok(hidden, d, 0.5):
            return Fraction(0)
        guess = Fraction(1, 2**hidden)
        if strategy is ForgeStrategy.EXACT_COUNT_GUESS:
            # right placement needs X == quota; P(X==quota and placement) = 2**-N
            hit = sum(w for x, w in victim_counts if x == quota) / math.comb(hidden, quota)
            hit = hit if balanced(quota, hidden) else Fraction(0)
        else:
            hit = sum(w * guess for x, w in victim_counts if balanced(x, hidden))
        return hit * other_positions(hidden) ** (n - 2)

    if conditioning == "premise":
        hidden = d // 2
        return float(given_hidden(hidden, [(quota, Fraction(1))]))

    total = Fraction(0)
    mass = Fraction(0)
    for hidden in range(d + 1):
        if strategy is ForgeStrategy.EXACT_COUNT_GUESS and hidden < quota:
            continue
        p_hidden = _binom_pmf(d, hidden)
        mass += p_hidden
        counts = [(x, _binom_pmf(hidden, x)) for x in range(hidden + 1)]
        total += p_hidden * given_hidden(hidden, counts)
    return float(total / mass)


# --------------------------------------------------------------- simulation


def premise_bits(n: int, d: int, victim: int, forger: int, c: int, rng: np.random.Generator) -> TupleSequence:
    """Alice's bits conditioned on exactly d/2 forger-hidden tuples, d/4 of them carrying ``c`` at the victim."""
    bits = rng.integers(0, 2, size=(d, n), dtype=np.int8)
    half, quota = d // 2, d // 4
    col = np.array([1 - c] * half + [c] * (d - half), dtype=np.int8)
    rng.shuffle(col)
    bits[:, forger - 1] = col
    hidden = np.flatnonzero(col == 1 - c)
    vcol = np.array([c] * quota + [1 - c] * (half - quota), dtype=np.int8)
    rng.shuffle(vcol)
    bits[hidden, victim - 1] = vcol
    return TupleSequence._wrap(bits)


def _forge_trial(rng, d, n, strategy, tol, conditioning, victim, forger, c=1):
    if conditioning == "premise":
        alice = premise_bits(n, d, victim, forger, c, rng)
    else:
        alice = distribute(n, d, NoiseModel(0.0), rng).alice_bits
    proof_victim = build_proof(alice, victim, c)
    proof_forger = build_proof(alice, forger, c)
    try:
        forged = forge_proof(proof_forger, forger, 1 - c, strategy, rng)
    except DegenerateForgeError:
        return None
    result = is_bob_proof_consistent(victim, forger, c, proof_victim, 1 - c, forged, tol)
    return result.passed


def estimate_forge_success(
    d: int,
    n: int,
    trials: int,
    strategy: ForgeStrategy,
    tol: TolerancePolicy,
    seed: int,
    conditioning: str = "physical",
    workers: int = 1,
) -> EstimateReport:
    """Rate at which a victim's cross-check accepts a forged opposite-outcome proof."""
    check_accuracy_degree(d)
    if conditioning not in CONDITIONINGS:
        raise ValueError(f"conditioning must be one of {CONDITIONINGS}")
    strategy = ForgeStrategy.parse(strategy)
    func = partial(
        _forge_trial, d=d, n=n, strategy=strategy, tol=tol, conditioning=conditioning, victim=1, forger=2
    )
    results = run_trials(func, seed, trials, workers)
    done = [r for r in results if r is not None]
    return EstimateReport(
        scenario="S2",
        d=d,
        n=n,
        trials=len(done),
        successes=sum(done),
        seed=seed,
        analytic=forge_success_probability(d, strategy, conditioning, tol, n),
        skipped=trials - len(done),
        extra={
            "strategy": strategy.value,
            "conditioning": conditioning,
            "formula": analytic_cheat_probability(d),
        },
    )


@dataclass
class CountsReport:
    d: int
    n: int
    trials: int
    seed: int
    means: dict
    standard_errors: dict
    identity_holds: bool

    def to_dict(self) -> dict:
        return asdict(self)


def _counts_trial(rng, d, n):
    dist = distribute(n, d, NoiseModel(0.0), rng)
    c = int(rng.integers(0, 2))
    p = build_proof(dist.alice_bits, 1, c)
    at_k = p.column(1) == c
    other = p.column(2)
    return (
        int(at_k.sum()),
        int(p.cryptic_mask().sum()),
        int((at_k & (other == c)).sum()),
        int((at_k & (other == 1 - c)).sum()),
    )


def expected_counts_experiment(d: int, n: int, trials: int, seed: int, workers: int = 1) -> CountsReport:
    """Empirical means of the four counts an honest proof is tested on."""
    check_accuracy_degree(d)
    rows = np.array(run_trials(partial(_counts_trial, d=d, n=n), seed, trials, workers), dtype=float)
    names = ("P_c", "P_star", "P_cc", "P_c_cbar")
    means = {k: float(v) for k, v in zip(names, rows.mean(axis=0))}
    ddof = 1 if trials > 1 else 0
    ses = {k: float(v) for k, v in zip(names, rows.std(axis=0, ddof=ddof) / math.sqrt(trials))}
    identity = bool(np.all(rows[:, 0] + rows[:, 1] == d))
    return CountsReport(d, n, trials, seed, means, ses, identity)


# ---------------------------------------------------------- full-round rates


def scenario_behavior(scenario: str, n: int, strategy=ForgeStrategy.EXACT_COUNT_GUESS, c: int = 1) -> NetworkBehavior:
    """Standard actor assignment for each named scenario.

    S1: aggregator 1 gets a proof for the opposite outcome.  S2: aggregator
    ``n`` forges.  S3: aggregator 1 gets ``c``, everyone else the opposite.
    """
    if scenario == "Honest":
        return NetworkBehavior(VerifierBehavior.honest(c))
    if scenario == "S1":
        return NetworkBehavior(VerifierBehavior.inconsistent(c, victims=(1,)))
    if scenario == "S2":
        return NetworkBehavior(VerifierBehavior.honest(c), {n: AggregatorBehavior.forger(strategy)})
    if scenario == "S3":
        return NetworkBehavior(VerifierBehavior.contradictory(c, targets=(1,)))
    raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")


@dataclass(frozen=True)
class RoundTally:
    aborted: bool
    detected: bool
    false_alarm: bool
    misattribution: bool
    victim_reasons: tuple


def tally_round(scenario: str, outcome, n: int) -> RoundTally:
    net = outcome.networks[0]
    if net.aborted:
        return RoundTally(True, False, False, False, ())
    verifier = verifier_id(1)
    forger = aggregator_id(1, n) if scenario == "S2" else None
    culprit = {"S1": verifier, "S3": verifier, "S2": forger}.get(scenario)
    honest = [k for k in range(1, n + 1) if aggregator_id(1, k) != forger]
    witnesses = {"S1": [1], "S2": honest, "S3": list(range(1, n + 1))}.get(scenario, [])

    def blamed(k):
        return net.new_m_a(k) | net.new_m_v(k)

    false_alarm = any(blamed(k) - {culprit} for k in honest)
    detected = bool(witnesses) and all(culprit in blamed(k) for k in witnesses)
    misattribution = any(culprit not in blamed(k) and blamed(k) for k in witnesses)
    reasons = []
    if scenario == "S1":
        for tag, _, result in net.state(1).checks:
            if tag == "coordinator":
                reasons.append(result.failure_reason.value)
    return RoundTally(False, detected, false_alarm, misattribution, tuple(reasons))


def _round_trial(rng, scenario, n, settings, strategy):
    topo = Topology.from_sizes([n])
    behavior = scenario_behavior(scenario, n, strategy)
    try:
        outcome = run_round(topo, [behavior], settings, rng)
    except DegenerateForgeError:
        return None
    return tally_round(scenario, outcome, n)


@dataclass
class DetectionReport:
    scenario: str
    d: int
    n: int
    trials: int
    seed: int
    detected: int
    false_alarms: int
    misattributions: int
    aborted: int
    skipped: int
    victim_reasons: dict
    analytic_misattribution: float | None = None

    def estimates(self) -> list[EstimateReport]:
        out = []
        if self.scenario != "Honest":
            out.append(EstimateReport(f"{self.scenario}:detection", self.d, self.n, self.trials, self.detected, self.seed))
        out.append(EstimateReport(f"{self.scenario}:false_alarm", self.d, self.n, self.trials, self.false_alarms, self.seed))
        if self.scenario != "Honest":
            out.append(
                EstimateReport(
                    f"{self.scenario}:misattribution",
                    self.d,
                    self.n,
                    self.trials,
                    self.misattributions,
                    self.seed,
                    analytic=self.analytic_misattribution,
                )
            )
        return out

    def rate(self, what: str) -> float:
        return getattr(self, what) / self.trials

    def to_dict(self) -> dict:
        return asdict(self)


def detection_rate(
    scenario: str,
    d: int,
    n: int,
    trials: int,
    tol: TolerancePolicy,
    noise: NoiseModel,
    seed: int,
    strategy: ForgeStrategy = ForgeStrategy.EXACT_COUNT_GUESS,
    workers: int = 1,
    d_v: int | None = None,
    validation_threshold: float = 0.05,
) -> DetectionReport:
    """Run full rounds of one scenario and tabulate who got blamed.

    Rates count only rounds that completed (aborted and degenerate rounds are
    reported separately and excluded from ``trials``).
    """
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    strategy = ForgeStrategy.parse(strategy)
    settings = RoundSettings(d=d, d_v=d_v, noise=noise, validation_threshold=validation_threshold, tol=tol)
    func = partial(_round_trial, scenario=scenario, n=n, settings=settings, strategy=strategy)
    tallies = run_trials(func, seed, trials, workers)
    skipped = sum(t is None for t in tallies)
    aborted = sum(1 for t in tallies if t is not None and t.aborted)
    done = [t for t in tallies if t is not None and not t.aborted]
    reasons: dict = {}
    for t in done:
        for r in t.victim_reasons:
            reasons[r] = reasons.get(r, 0) + 1
    analytic = None
    if scenario == "S2" and n == 2 and noise.epsilon == 0.0:
        analytic = forge_success_probability(d, strategy, "physical", tol, n)
    return DetectionReport(
        scenario,
        d,
        n,
        len(done),
        seed,
        sum(t.detected for t in done),
        sum(t.false_alarm for t in done),
        sum(t.misattribution for t in done),
        aborted,
        skipped,
        reasons,
        analytic,
    )


__all__ = [
    "EstimateReport",
    "CountsReport",
    "DetectionReport",
    "analytic_cheat_probability",
    "cheat_probability_fraction",
    "detection_rate",
    "estimate_forge_success",
    "expected_counts_experiment",
    "forge_success_probability",
    "premise_bits",
    "reports_csv",
    "reports_json",
    "run_trials",
    "scenario_behavior",
    "table1",
    "trial_rng",
]
