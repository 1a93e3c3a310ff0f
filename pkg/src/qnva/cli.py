"""``qnva`` command line: table1, simulate, sweep, oracle.

Results go to stdout or to the configured output file; logs go to stderr.
Exit codes: 0 success, 2 configuration error, 3 aborted single round.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from functools import partial
from pathlib import Path

from . import experiments as ex
from .checks import TolerancePolicy
from .config import ScenarioConfig
from .errors import ConfigurationError
from .proofs import ForgeStrategy
from .protocol import run_round
from .quantum import (
    BellState,
    NoiseModel,
    bell_weights,
    histogram_csv,
    oracle_measure_bell,
    oracle_measure_plus,
    plus_weights,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORTED = 3

log = logging.getLogger("qnva")

ORACLE_STATES = ("phi+", "phi-", "psi+", "psi-", "plus")


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the configuration-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    Path(path).write_text(text)
    log.info("wrote %s", path)


def _require_seed(seed):
    if seed is None:
        raise ConfigurationError("--seed is required for this command")
    return seed


# ------------------------------------------------------------------ table1


def table1_text(fmt: str = "csv") -> str:
    rows = ex.table1()
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["d", "d_half", "d_quarter", "probability", "printed_cells_consistent"])
    for r in rows:
        writer.writerow([r["d"], r["half"], r["quarter"], f"{r['probability']:.5g}", r["printed_cells_consistent"]])
    return buf.getvalue()


def cmd_table1(args) -> int:
    for r in ex.table1():
        if not r["printed_cells_consistent"]:
            log.warning(
                "reference table prints (%d, %d) for d=%d; correct cells are (%d, %d)",
                r["printed_half"], r["printed_quarter"], r["d"], r["half"], r["quarter"],
            )
    _emit(table1_text(args.format), args.output)
    return EXIT_OK


# ---------------------------------------------------------------- simulate


def _one_round(rng, topology, behaviors, settings):
    # workers return plain records; protocol state holds read-only mappings
    o = run_round(topology, behaviors, settings, rng)
    rows = [
        [
            st.network,
            st.id,
            st.decision.value,
            ";".join(sorted(net.new_m_a(st.k))),
            ";".join(sorted(net.new_m_v(st.k))),
            net.aborted,
        ]
        for net in o.networks
        for st in net.states
    ]
    return o.to_dict(), rows, o.aborted


def _round_outputs(cfg: ScenarioConfig, workers: int) -> tuple[str, bool]:
    func = partial(_one_round, topology=cfg.topology(), behaviors=cfg.behaviors(), settings=cfg.settings())
    records = ex.run_trials(func, cfg.seed, cfg.trials, workers, chunk=50)
    aborted = cfg.trials == 1 and records[0][2]
    if cfg.output_format == "json":
        doc = {"seed": cfg.seed, "config": cfg.to_dict(), "rounds": [r[0] for r in records]}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n", aborted
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["trial", "network", "aggregator", "decision", "new_m_a", "new_m_v", "aborted", "seed"])
    for t, (_, rows, _) in enumerate(records):
        for row in rows:
            writer.writerow([t, *row, cfg.seed])
    return buf.getvalue(), aborted


def _network_size(cfg: ScenarioConfig) -> int:
    if cfg.m != 1:
        log.warning("%s mode uses only the first network (n=%d)", cfg.mode, cfg.networks[0].size)
    return cfg.networks[0].size


def _experiment_output(cfg: ScenarioConfig, workers: int) -> str:
    n = _network_size(cfg)
    if cfg.mode == "forge":
        report = ex.estimate_forge_success(
            cfg.d, n, cfg.trials, cfg.strategy, cfg.tolerance, cfg.seed, cfg.conditioning, workers
        )
        reports = [report]
    elif cfg.mode == "detection":
        det = ex.detection_rate(
            cfg.scenario,
            cfg.d,
            n,
            cfg.trials,
            cfg.tolerance,
            NoiseModel(cfg.epsilon),
            cfg.seed,
            cfg.strategy,
            workers,
            cfg.d_v,
            cfg.validation_threshold,
        )
        if cfg.output_format == "json":
            doc = {"report": det.to_dict(), "estimates": [r.to_dict() for r in det.estimates()]}
            return json.dumps(doc, indent=2, sort_keys=True) + "\n"
        reports = det.estimates()
    else:  # counts
        counts = ex.expected_counts_experiment(cfg.d, n, cfg.trials, cfg.seed, workers)
        if cfg.output_format == "json":
            return json.dumps(counts.to_dict(), indent=2, sort_keys=True) + "\n"
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["statistic", "d", "n", "trials", "mean", "standard_error", "seed"])
        for name, mean in counts.means.items():
            writer.writerow([name, cfg.d, n, cfg.trials, f"{mean:.8g}", f"{counts.standard_errors[name]:.8g}", cfg.seed])
        return buf.getvalue()
    return ex.reports_json(reports) if cfg.output_format == "json" else ex.reports_csv(reports)


def cmd_simulate(args) -> int:
    cfg = ScenarioConfig.load(args.config)
    if args.seed is not None:
        cfg = ScenarioConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    log.info("mode=%s d=%d trials=%d seed=%d workers=%d", cfg.mode, cfg.d, cfg.trials, cfg.seed, args.workers)
    path = args.output or cfg.output_path
    if cfg.mode == "round":
        text, aborted = _round_outputs(cfg, args.workers)
        _emit(text, path)
        if aborted:
            log.error("round aborted: entanglement validation failed")
            return EXIT_ABORTED
        return EXIT_OK
    _emit(_experiment_output(cfg, args.workers), path)
    return EXIT_OK


# ------------------------------------------------------------------- sweep


def _parse_degrees(text: str) -> list[int]:
    try:
        ds = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigurationError(f"--d expects a comma-separated list of integers, got {text!r}") from None
    if not ds:
        raise ConfigurationError("--d needs at least one value")
    for d in ds:
        if d < 4 or d % 4:
            raise ConfigurationError(f"d must be a multiple of 4 (d mod 4 = 0); got d={d}")
    return ds


def cmd_sweep(args) -> int:
    seed = _require_seed(args.seed)
    if args.trials < 1:
        raise ConfigurationError("--trials must be at least 1")
    degrees = _parse_degrees(args.d)
    try:
        tol = TolerancePolicy(z_count=args.z, epsilon=args.epsilon)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None
    strategy = ForgeStrategy.parse(args.strategy)
    reports = []
    for d in degrees:
        if args.scenario == "S2" and args.mode == "pair":
            r = ex.estimate_forge_success(d, args.n, args.trials, strategy, tol, seed, args.conditioning, args.workers)
            reports.append(r)
        else:
            det = ex.detection_rate(
                args.scenario, d, args.n, args.trials, tol, NoiseModel(args.epsilon), seed, strategy, args.workers
            )
            reports.extend(det.estimates())
        log.info("d=%d done", d)
    _emit(ex.reports_json(reports) if args.format == "json" else ex.reports_csv(reports), args.output)
    return EXIT_OK


# ------------------------------------------------------------------ oracle


def cmd_oracle(args) -> int:
    name = args.state.lower()
    if name not in ORACLE_STATES:
        raise ConfigurationError(f"unknown state {args.state!r}; expected one of {', '.join(ORACLE_STATES)}")
    if args.analytic:
        weights = plus_weights() if name == "plus" else bell_weights(BellState.from_name(name))
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["state", "outcome", "probability"])
        for outcome, w in weights.items():
            writer.writerow([name, outcome, f"{w:.12g}"])
        _emit(buf.getvalue(), args.output)
        return EXIT_OK
    seed = _require_seed(args.seed)
    if args.shots < 1:
        raise ConfigurationError("--shots must be at least 1")
    rng = ex.trial_rng(seed, 0)
    hist = oracle_measure_plus(args.shots, rng) if name == "plus" else oracle_measure_bell(BellState.from_name(name), args.shots, rng)
    _emit(histogram_csv(name, hist), args.output)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qnva", description="Simulate and audit the quantum news verification protocol.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("table1", help="analytic cheating probability for d = 4..64")
    t.add_argument("--format", choices=("csv", "json"), default="csv")
    t.add_argument("--output")
    t.add_argument("--seed", type=int, help="accepted for uniformity; unused")
    t.set_defaults(func=cmd_table1)

    s = sub.add_parser("simulate", help="run a YAML scenario config")
    s.add_argument("--config", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--seed", type=int, help="override the config seed")
    s.add_argument("--output", help="override output.path")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="rates over a list of accuracy degrees")
    w.add_argument("--scenario", choices=ex.SCENARIOS, default="S2")
    w.add_argument("--d", required=True, help="comma-separated, e.g. 8,16")
    w.add_argument("--trials", type=int, required=True)
    w.add_argument("--seed", type=int)
    w.add_argument("--n", type=int, default=2)
    w.add_argument("--strategy", choices=[s.value for s in ForgeStrategy], default="exact_count")
    w.add_argument("--conditioning", choices=ex.CONDITIONINGS, default="physical")
    w.add_argument("--mode", choices=("pair", "round"), default="pair",
                   help="S2 only: isolated victim/forger check or full rounds")
    w.add_argument("--z", type=float, default=4.0)
    w.add_argument("--epsilon", type=float, default=0.0)
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--format", choices=("csv", "json"), default="csv")
    w.add_argument("--output")
    w.set_defaults(func=cmd_sweep)

    o = sub.add_parser("oracle", help="measurement histogram of a Bell or |+> state")
    o.add_argument("state", help="phi+, phi-, psi+, psi- or plus")
    o.add_argument("--shots", type=int, default=100000)
    o.add_argument("--seed", type=int)
    o.add_argument("--analytic", action="store_true", help="exact weights instead of samples")
    o.add_argument("--output")
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    if getattr(args, "workers", 1) < 1:
        log.error("--workers must be at least 1")
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigurationError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
