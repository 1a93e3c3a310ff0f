import csv
import io
import json
import subprocess
import sys
from pathlib import Path

import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from qnva.cli import EXIT_ABORTED, EXIT_CONFIG, EXIT_OK, main
from qnva.config import EXAMPLE, ScenarioConfig
from qnva.errors import ConfigurationError

REPO = Path(__file__).resolve().parent.parent
CONFIGS = REPO / "examples" / "configs"


def _write(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data) if isinstance(data, dict) else data)
    return path


class TestConfig:
    def test_example_parses(self):
        cfg = ScenarioConfig.loads(EXAMPLE)
        assert cfg.d == 16 and cfg.m == 1 and cfg.networks[0].size == 4

    @pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.yaml")), ids=lambda p: p.name)
    def test_repo_configs_parse(self, path):
        ScenarioConfig.load(path)

    def test_round_trip(self):
        cfg = ScenarioConfig.loads(EXAMPLE)
        again = ScenarioConfig.loads(cfg.dump())
        assert again == cfg
        assert again.dump() == cfg.dump()

    def test_seed_required(self):
        with pytest.raises(ConfigurationError, match="seed"):
            ScenarioConfig.from_dict({"d": 16})

    def test_d_mod_4(self):
        with pytest.raises(ConfigurationError, match="multiple of 4"):
            ScenarioConfig.from_dict({"seed": 1, "d": 10})

    @pytest.mark.parametrize(
        "patch",
        [
            {"networks": [{"size": 2, "aggregators": {3: {"kind": "forger"}}}]},
            {"networks": [{"size": 2, "verifier": {"kind": "contradictory", "targets": [5]}}]},
            {"networks": [{"size": 1}]},
            {"networks": []},
            {"m": 2},
            {"mode": "chaos"},
            {"colour": "blue"},
            {"tolerance": {"z_count": 0}},
            {"epsilon": 1.5},
            {"strategy": "psychic"},
            {"output": {"format": "xml"}},
            {"trials": 0},
        ],
    )
    def test_invalid(self, patch):
        with pytest.raises(ConfigurationError):
            ScenarioConfig.from_dict({"seed": 1, **patch})

    def test_not_a_mapping(self):
        with pytest.raises(ConfigurationError):
            ScenarioConfig.loads("- 1\n- 2\n")
        with pytest.raises(ConfigurationError):
            ScenarioConfig.loads("seed: [unclosed\n")

    @settings(max_examples=50, deadline=None)
    @given(
        seed=st.integers(0, 2**31),
        d=st.sampled_from([4, 8, 16, 64]),
        eps=st.sampled_from([0.0, 0.01, 0.2]),
        sizes=st.lists(st.integers(2, 6), min_size=1, max_size=3),
        kind=st.sampled_from(["honest", "inconsistent", "contradictory"]),
        forger=st.booleans(),
        strict=st.booleans(),
        budget=st.one_of(st.none(), st.floats(0, 1)),
        mode=st.sampled_from(["round", "detection", "forge", "counts"]),
    )
    def test_round_trip_property(self, seed, d, eps, sizes, kind, forger, strict, budget, mode):
        raw = {
            "seed": seed,
            "d": d,
            "epsilon": eps,
            "mode": mode,
            "tolerance": {"strict_mode": strict, "mismatch_budget": budget},
            "networks": [
                {
                    "size": n,
                    "verifier": {"kind": kind, "c": 0, "targets": [1, 2]},
                    "aggregators": {n: {"kind": "forger", "strategy": "uniform"}} if forger else {},
                }
                for n in sizes
            ],
        }
        cfg = ScenarioConfig.from_dict(raw)
        assert ScenarioConfig.loads(cfg.dump()) == cfg


def _run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestCommands:
    def test_table1(self, capsys):
        code, out, err = _run(["table1"], capsys)
        assert code == EXIT_OK
        rows = list(csv.DictReader(io.StringIO(out)))
        assert [r["d"] for r in rows] == ["4", "8", "16", "32", "64"]
        assert rows[0]["probability"] == "0.5"
        assert float(rows[4]["probability"]) == pytest.approx(1.6637e-9, rel=1e-4)
        assert "d=32" in err

    def test_table1_json(self, capsys):
        code, out, _ = _run(["table1", "--format", "json"], capsys)
        assert json.loads(out)[2]["probability"] == pytest.approx(1 / 70)

    def test_oracle_phi_plus(self, capsys):
        code, out, _ = _run(["oracle", "phi+", "--shots", "100000", "--seed", "3"], capsys)
        rows = {r["outcome"]: int(r["count"]) for r in csv.DictReader(io.StringIO(out))}
        assert code == EXIT_OK and rows["01"] == rows["10"] == 0
        assert sum(rows.values()) == 100_000

    def test_oracle_plus(self, capsys):
        code, out, _ = _run(["oracle", "plus", "--shots", "100000", "--seed", "3"], capsys)
        rows = {r["outcome"]: int(r["count"]) for r in csv.DictReader(io.StringIO(out))}
        assert abs(rows["0"] / 100_000 - 0.5) <= 0.005

    def test_oracle_analytic(self, capsys):
        code, out, _ = _run(["oracle", "psi-", "--analytic"], capsys)
        rows = {r["outcome"]: float(r["probability"]) for r in csv.DictReader(io.StringIO(out))}
        assert rows == {"00": 0.0, "01": 0.5, "10": 0.5, "11": 0.0}

    def test_oracle_unknown_state(self, capsys):
        code, _, err = _run(["oracle", "ghz", "--seed", "1"], capsys)
        assert code == EXIT_CONFIG and "unknown state" in err

    def test_seed_required(self, capsys):
        assert _run(["oracle", "plus", "--shots", "5"], capsys)[0] == EXIT_CONFIG
        assert _run(["sweep", "--d", "8", "--trials", "10"], capsys)[0] == EXIT_CONFIG

    def test_sweep(self, capsys):
        code, out, _ = _run(
            ["sweep", "--scenario", "S2", "--d", "8,16", "--trials", "3000", "--seed", "4", "--conditioning", "premise"],
            capsys,
        )
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == EXIT_OK and [r["d"] for r in rows] == ["8", "16"]
        assert float(rows[0]["analytic"]) == pytest.approx(1 / 6, rel=1e-6)
        assert all(r["seed"] == "4" for r in rows)

    def test_sweep_rounds(self, capsys):
        code, out, _ = _run(["sweep", "--scenario", "S3", "--d", "16", "--trials", "50", "--seed", "4"], capsys)
        assert code == EXIT_OK
        assert [r["scenario"] for r in csv.DictReader(io.StringIO(out))][0] == "S3:detection"

    def test_sweep_bad_d(self, capsys):
        code, _, err = _run(["sweep", "--d", "8,10", "--trials", "10", "--seed", "1"], capsys)
        assert code == EXIT_CONFIG and "multiple of 4" in err

    def test_usage_error_is_config_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["simulate"])
        assert exc.value.code == EXIT_CONFIG


class TestSimulate:
    def test_honest_round(self, tmp_path, capsys):
        out = tmp_path / "round.json"
        code, _, _ = _run(["simulate", "--config", str(CONFIGS / "honest_round.yaml"), "--output", str(out)], capsys)
        doc = json.loads(out.read_text())
        assert code == EXIT_OK
        rnd = doc["rounds"][0]
        assert rnd["phases"] == 3 and not rnd["aborted"]
        assert doc["seed"] == 20240901

    def test_bad_d_exit_2(self, tmp_path, capsys):
        path = _write(tmp_path, {"seed": 1, "d": 10})
        code, _, err = _run(["simulate", "--config", str(path)], capsys)
        assert code == EXIT_CONFIG and "d mod 4" in err

    def test_unreadable(self, tmp_path, capsys):
        code, _, err = _run(["simulate", "--config", str(tmp_path / "missing.yaml")], capsys)
        assert code == EXIT_CONFIG and "cannot read" in err

    def test_aborted_round_exit_3(self, tmp_path, capsys):
        path = _write(tmp_path, {"seed": 3, "epsilon": 0.5, "d_v": 200, "output": {"path": str(tmp_path / "o.json")}})
        code, _, _ = _run(["simulate", "--config", str(path)], capsys)
        assert code == EXIT_ABORTED
        assert json.loads((tmp_path / "o.json").read_text())["rounds"][0]["aborted"]

    def test_detection_csv(self, tmp_path, capsys):
        path = _write(
            tmp_path,
            {"seed": 5, "mode": "detection", "scenario": "S1", "trials": 100, "networks": [{"size": 2}],
             "output": {"format": "csv"}},
        )
        code, out, _ = _run(["simulate", "--config", str(path)], capsys)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == EXIT_OK and rows[0]["scenario"] == "S1:detection" and rows[0]["rate"] == "1"

    def test_counts_and_forge(self, tmp_path, capsys):
        for mode in ("counts", "forge"):
            path = _write(tmp_path, {"seed": 5, "mode": mode, "d": 8, "trials": 200, "networks": [{"size": 2}]})
            code, out, _ = _run(["simulate", "--config", str(path)], capsys)
            assert code == EXIT_OK and json.loads(out)

    def test_round_csv(self, tmp_path, capsys):
        path = _write(tmp_path, {"seed": 2, "trials": 2, "networks": [{"size": 3}], "output": {"format": "csv"}})
        code, out, _ = _run(["simulate", "--config", str(path)], capsys)
        rows = list(csv.DictReader(io.StringIO(out)))
        assert code == EXIT_OK and len(rows) == 6

    def test_seed_override(self, tmp_path, capsys):
        path = _write(tmp_path, {"seed": 2, "networks": [{"size": 2}]})
        _, a, _ = _run(["simulate", "--config", str(path)], capsys)
        _, b, _ = _run(["simulate", "--config", str(path), "--seed", "2"], capsys)
        _, c, _ = _run(["simulate", "--config", str(path), "--seed", "3"], capsys)
        assert a == b and a != c


def test_console_script_logs_to_stderr(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "qnva.cli", "table1"], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("d,d_half")
    assert "WARNING" in proc.stderr and "WARNING" not in proc.stdout
