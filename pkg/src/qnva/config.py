"""YAML scenario files for ``qnva simulate``.

A complete example lives in ``examples/configs/honest_round.yaml`` at the
repository root; every key is listed in :data:`EXAMPLE`.  Parsing is strict:
unknown keys and out-of-range values raise :class:`ConfigurationError`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .checks import TolerancePolicy
from .errors import ConfigurationError
from .experiments import CONDITIONINGS, SCENARIOS
from .network import Topology
from .proofs import ForgeStrategy
from .protocol import AggregatorBehavior, NetworkBehavior, RoundSettings, VerifierBehavior
from .quantum import NoiseModel

MODES = ("round", "detection", "forge", "counts")
FORMATS = ("json", "csv")

EXAMPLE = """\
seed: 20240901          # required; no wall-clock default
mode: round             # round | detection | forge | counts
d: 16                   # accuracy degree, multiple of 4
d_v: 4                  # tuples sacrificed for entanglement validation
epsilon: 0.0            # bit-flip probability on entangled positions
validation_threshold: 0.05
trials: 1
scenario: Honest        # detection mode: Honest | S1 | S2 | S3
strategy: exact_count   # forger strategy: exact_count | uniform
conditioning: physical  # forge mode: physical | premise
tolerance:
  z_count: 4.0
  mismatch_budget: null # null derives the allowance from epsilon
  set_diff_budget: 0
  strict_mode: false
networks:
  - size: 4
    verifier: {kind: honest, c: 1}
    aggregators: {}
output:
  format: json
  path: round.json
"""


@dataclass(frozen=True)
class NetworkSpec:
    size: int
    verifier: VerifierBehavior = VerifierBehavior()
    aggregators: tuple = ()  # sorted (k, AggregatorBehavior) pairs

    def behavior(self) -> NetworkBehavior:
        return NetworkBehavior(self.verifier, dict(self.aggregators))


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    d: int = 16
    d_v: int | None = None
    epsilon: float = 0.0
    validation_threshold: float = 0.05
    trials: int = 1
    mode: str = "round"
    scenario: str = "Honest"
    strategy: ForgeStrategy = ForgeStrategy.EXACT_COUNT_GUESS
    conditioning: str = "physical"
    tolerance: TolerancePolicy = TolerancePolicy()
    networks: tuple = (NetworkSpec(4),)
    output_format: str = "json"
    output_path: str | None = None

    @property
    def m(self) -> int:
        return len(self.networks)

    def topology(self) -> Topology:
        return Topology.from_sizes([n.size for n in self.networks])

    def behaviors(self) -> list[NetworkBehavior]:
        return [n.behavior() for n in self.networks]

    def settings(self) -> RoundSettings:
        return RoundSettings(
            d=self.d,
            d_v=self.d_v,
            noise=NoiseModel(self.epsilon),
            validation_threshold=self.validation_threshold,
            tol=self.tolerance,
        )

    def to_dict(self) -> dict:
        tol = self.tolerance
        return {
            "seed": self.seed,
            "mode": self.mode,
            "d": self.d,
            "d_v": self.d_v,
            "epsilon": self.epsilon,
            "validation_threshold": self.validation_threshold,
            "trials": self.trials,
            "scenario": self.scenario,
            "strategy": self.strategy.value,
            "conditioning": self.conditioning,
            "tolerance": {
                "z_count": tol.z_count,
                "mismatch_budget": tol.mismatch_budget,
                "set_diff_budget": tol.set_diff_budget,
                "strict_mode": tol.strict,
            },
            "networks": [
                {
                    "size": net.size,
                    "verifier": {
                        "kind": net.verifier.kind,
                        "c": net.verifier.c,
                        "targets": sorted(net.verifier.targets),
                    },
                    "aggregators": {
                        k: {"kind": b.kind, "strategy": b.strategy.value} for k, b in net.aggregators
                    },
                }
                for net in self.networks
            ],
            "output": {"format": self.output_format, "path": self.output_path},
        }

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, raw: Any) -> "ScenarioConfig":
        if not isinstance(raw, dict):
            raise ConfigurationError("config must be a mapping at the top level")
        return _parse(raw)

    @classmethod
    def loads(cls, text: str) -> "ScenarioConfig":
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"config is not valid YAML: {exc}") from None
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.loads(text)


_TOP_KEYS = {
    "seed", "mode", "d", "d_v", "epsilon", "validation_threshold", "trials", "scenario",
    "strategy", "conditioning", "tolerance", "networks", "output", "m",
}


def _int(value, name, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"{name} must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigurationError(f"{name} must be >= {minimum}, got {value}")
    return value


def _float(value, name) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{name} must be a number, got {value!r}")
    return float(value)


def _choice(value, name, options):
    if value not in options:
        raise ConfigurationError(f"{name} must be one of {', '.join(options)}; got {value!r}")
    return value


def _unknown(raw: dict, allowed: set, where: str):
    extra = set(raw) - allowed
    if extra:
        raise ConfigurationError(f"unknown key(s) in {where}: {', '.join(sorted(map(str, extra)))}")


def _parse_network(raw, idx: int) -> NetworkSpec:
    where = f"networks[{idx}]"
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{where} must be a mapping")
    _unknown(raw, {"size", "verifier", "aggregators"}, where)
    size = _int(raw.get("size"), f"{where}.size", 2)
    v = raw.get("verifier") or {}
    if not isinstance(v, dict):
        raise ConfigurationError(f"{where}.verifier must be a mapping")
    _unknown(v, {"kind", "c", "targets"}, f"{where}.verifier")
    kind = _choice(v.get("kind", "honest"), f"{where}.verifier.kind", VerifierBehavior.KINDS)
    c = _choice(v.get("c", 1), f"{where}.verifier.c", (0, 1))
    targets = v.get("targets", [1])
    if not isinstance(targets, list):
        raise ConfigurationError(f"{where}.verifier.targets must be a list")
    for t in targets:
        t = _int(t, f"{where}.verifier.targets", 1)
        if t > size:
            raise ConfigurationError(f"{where}.verifier.targets references aggregator {t}, network has {size}")
    verifier = VerifierBehavior(kind, c, frozenset(targets))

    aggs = raw.get("aggregators") or {}
    if not isinstance(aggs, dict):
        raise ConfigurationError(f"{where}.aggregators must map positions to behaviors")
    pairs = []
    for k, spec in aggs.items():
        k = _int(k, f"{where}.aggregators key", 1)
        if k > size:
            raise ConfigurationError(f"{where}.aggregators references aggregator {k}, network has {size}")
        if not isinstance(spec, dict):
            raise ConfigurationError(f"{where}.aggregators[{k}] must be a mapping")
        _unknown(spec, {"kind", "strategy"}, f"{where}.aggregators[{k}]")
        akind = _choice(spec.get("kind", "honest"), f"{where}.aggregators[{k}].kind", ("honest", "forger"))
        try:
            strategy = ForgeStrategy.parse(spec.get("strategy", "exact_count"))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        pairs.append((k, AggregatorBehavior(akind, strategy)))
    return NetworkSpec(size, verifier, tuple(sorted(pairs, key=lambda p: p[0])))


def _parse(raw: dict) -> ScenarioConfig:
    _unknown(raw, _TOP_KEYS, "config")
    if raw.get("seed") is None:
        raise ConfigurationError("seed is required (runs must be reproducible)")
    seed = _int(raw["seed"], "seed", 0)
    d = _int(raw.get("d", 16), "d")
    if d < 4 or d % 4:
        raise ConfigurationError(f"d must be a multiple of 4 (d mod 4 = 0) and at least 4; got d={d}")
    d_v = raw.get("d_v")
    if d_v is not None:
        d_v = _int(d_v, "d_v", 0)
    eps = _float(raw.get("epsilon", 0.0), "epsilon")
    if not 0.0 <= eps < 1.0:
        raise ConfigurationError(f"epsilon must lie in [0, 1), got {eps}")
    thr = _float(raw.get("validation_threshold", 0.05), "validation_threshold")
    if not 0.0 <= thr <= 1.0:
        raise ConfigurationError(f"validation_threshold must lie in [0, 1], got {thr}")
    trials = _int(raw.get("trials", 1), "trials", 1)
    mode = _choice(raw.get("mode", "round"), "mode", MODES)
    scenario = _choice(raw.get("scenario", "Honest"), "scenario", SCENARIOS)
    try:
        strategy = ForgeStrategy.parse(raw.get("strategy", "exact_count"))
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None
    conditioning = _choice(raw.get("conditioning", "physical"), "conditioning", CONDITIONINGS)

    t = raw.get("tolerance") or {}
    if not isinstance(t, dict):
        raise ConfigurationError("tolerance must be a mapping")
    _unknown(t, {"z_count", "mismatch_budget", "set_diff_budget", "strict_mode"}, "tolerance")
    budget = t.get("mismatch_budget")
    try:
        tol = TolerancePolicy(
            z_count=_float(t.get("z_count", 4.0), "tolerance.z_count"),
            mismatch_budget=None if budget is None else _float(budget, "tolerance.mismatch_budget"),
            set_diff_budget=_int(t.get("set_diff_budget", 0), "tolerance.set_diff_budget", 0),
            epsilon=eps,
            strict=bool(t.get("strict_mode", False)),
        )
    except ValueError as exc:
        raise ConfigurationError(f"tolerance: {exc}") from None

    nets = raw.get("networks", [{"size": 4}])
    if not isinstance(nets, list) or not nets:
        raise ConfigurationError("networks must be a non-empty list")
    networks = tuple(_parse_network(n, i) for i, n in enumerate(nets))
    if "m" in raw and _int(raw["m"], "m", 1) != len(networks):
        raise ConfigurationError(f"m={raw['m']} but {len(networks)} networks are listed")

    out = raw.get("output") or {}
    if not isinstance(out, dict):
        raise ConfigurationError("output must be a mapping")
    _unknown(out, {"format", "path"}, "output")
    fmt = _choice(out.get("format", "json"), "output.format", FORMATS)
    path = out.get("path")
    if path is not None and not isinstance(path, str):
        raise ConfigurationError("output.path must be a string")

    return ScenarioConfig(
        seed=seed,
        d=d,
        d_v=d_v,
        epsilon=eps,
        validation_threshold=thr,
        trials=trials,
        mode=mode,
        scenario=scenario,
        strategy=strategy,
        conditioning=conditioning,
        tolerance=tol,
        networks=networks,
        output_format=fmt,
        output_path=path,
    )
