import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qnva.errors import DegenerateForgeError
from qnva.proofs import ForgeStrategy, build_proof, forge_proof, is_consistent_oracle
from qnva.quantum import NoiseModel, distribute
from qnva.sequences import CRYPTIC, TupleSequence, cryptic_positions, positions_with

from conftest import bit_sequences, seq


class TestBuildProof:
    def test_hand_example(self):
        alice = seq(["01", "10"])
        assert build_proof(alice, 1, 1) == seq(["**", "10"])

    def test_all_match(self):
        alice = seq(["10", "11", "10"])
        assert build_proof(alice, 1, 1) == alice

    def test_none_match(self):
        assert build_proof(seq(["01", "00"]), 1, 1) == TupleSequence.cryptic(2, 2)

    def test_rejects_cryptic_input(self):
        with pytest.raises(ValueError):
            build_proof(seq(["**", "10"]), 1, 1)

    def test_rejects_bad_bit(self):
        with pytest.raises(ValueError):
            build_proof(seq(["01"]), 1, 2)

    @given(bit_sequences(), st.integers(1, 6), st.integers(0, 1))
    def test_honest_invariants(self, alice, k, c):
        k = min(k, alice.n)
        p = build_proof(alice, k, c)
        assert p.is_valid_proof()
        assert len(positions_with(p, k, c)) + len(cryptic_positions(p)) == alice.d
        revealed = ~p.cryptic_mask()
        assert np.array_equal(p.cells[revealed], alice.cells[revealed])
        assert positions_with(p, k, c) == positions_with(alice, k, c)

    def test_personalized(self):
        rng = np.random.default_rng(77)
        for _ in range(1000):
            alice = distribute(4, 16, NoiseModel(), rng).alice_bits
            proofs = [build_proof(alice, k, 1) for k in range(1, 5)]
            for a, b in itertools.combinations(proofs, 2):
                assert a != b


class TestOracle:
    def test_true_for_built(self, rng):
        alice = distribute(3, 8, NoiseModel(), rng).alice_bits
        assert is_consistent_oracle(build_proof(alice, 2, 0), alice, 2, 0)

    def test_flipped_bit(self):
        alice = seq(["10", "11", "01"])
        cells = build_proof(alice, 1, 1).cells.copy()
        cells[0, 1] = 1
        assert not is_consistent_oracle(TupleSequence(cells), alice, 1, 1)

    def test_wrong_branch_reveal(self):
        alice = seq(["10", "11", "01"])
        cells = build_proof(alice, 1, 1).cells.copy()
        cells[2] = alice.cells[2]
        assert not is_consistent_oracle(TupleSequence(cells), alice, 1, 1)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            is_consistent_oracle(seq(["10"]), seq(["10", "01"]), 1, 1)


class TestForge:
    def _received(self, rng, d=8, n=3, c=1, forger=2):
        alice = distribute(n, d, NoiseModel(), rng).alice_bits
        return alice, build_proof(alice, forger, c)

    def test_reveals_exactly_the_hidden_tuples(self, rng):
        alice, received = self._received(rng)
        forged = forge_proof(received, 2, 0, ForgeStrategy.UNIFORM_GUESS, rng)
        assert forged.is_valid_proof()
        revealed = frozenset(range(1, 9)) - cryptic_positions(forged)
        assert revealed == cryptic_positions(received)
        assert positions_with(forged, 2, 0) == revealed

    def test_empty_hidden_set_gives_cryptic_forgery(self, rng):
        received = build_proof(seq(["11"] * 8), 2, 1)
        forged = forge_proof(received, 2, 0, ForgeStrategy.UNIFORM_GUESS, rng)
        assert forged == TupleSequence.cryptic(8, 2)

    def test_exact_count_places_quota(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            alice, received = self._received(rng, d=8)
            if len(cryptic_positions(received)) < 2:
                continue
            forged = forge_proof(received, 2, 0, ForgeStrategy.EXACT_COUNT_GUESS, rng)
            for r in (1, 3):
                # attacked position holds the verifier's outcome (target 1) exactly d/4 times
                assert len(positions_with(forged, r, 1)) == 2

    def test_exact_count_only_attacked(self):
        rng = np.random.default_rng(4)
        alice = TupleSequence(np.array([[1, 0, 1]] * 6 + [[0, 1, 0]] * 2))
        received = build_proof(alice, 2, 1)  # six hidden tuples
        forged = forge_proof(received, 2, 0, ForgeStrategy.EXACT_COUNT_GUESS, rng, attacked=[1])
        assert len(positions_with(forged, 1, 1)) == 2

    def test_exact_count_placement_is_uniform(self):
        rng = np.random.default_rng(5)
        alice = TupleSequence(np.array([[0, 1]] * 4 + [[1, 0]] * 4))
        received = build_proof(alice, 2, 1)  # hidden rows 5..8
        seen = {}
        for _ in range(6000):
            f = forge_proof(received, 2, 0, ForgeStrategy.EXACT_COUNT_GUESS, rng)
            key = positions_with(f, 1, 1)
            seen[key] = seen.get(key, 0) + 1
        assert len(seen) == 6  # C(4, 2)
        assert all(abs(v - 1000) < 5 * np.sqrt(1000 * 5 / 6) for v in seen.values())

    def test_degenerate(self, rng):
        alice = TupleSequence(np.array([[0, 1]] * 7 + [[1, 0]]))
        received = build_proof(alice, 2, 1)  # one hidden tuple, quota 2
        with pytest.raises(DegenerateForgeError):
            forge_proof(received, 2, 0, ForgeStrategy.EXACT_COUNT_GUESS, rng)

    def test_uniform_count_concentrates(self):
        rng = np.random.default_rng(6)
        d = 1024
        alice = distribute(2, d, NoiseModel(), rng).alice_bits
        forged = forge_proof(build_proof(alice, 2, 1), 2, 0, ForgeStrategy.UNIFORM_GUESS, rng)
        count = len(positions_with(forged, 1, 1))
        assert abs(count - d / 4) <= 3 * np.sqrt(3 * d / 16) + 3 * np.sqrt(d) / 4

    def test_bad_position(self, rng):
        _, received = self._received(rng)
        with pytest.raises(ValueError):
            forge_proof(received, 4, 0, ForgeStrategy.UNIFORM_GUESS, rng)

    def test_strategy_parse(self):
        assert ForgeStrategy.parse("uniform") is ForgeStrategy.UNIFORM_GUESS
        assert ForgeStrategy.parse("EXACT_COUNT_GUESS") is ForgeStrategy.EXACT_COUNT_GUESS
        with pytest.raises(ValueError):
            ForgeStrategy.parse("psychic")

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from(list(ForgeStrategy)), st.integers(0, 1))
    def test_forgery_shape_property(self, seed, strategy, c):
        rng = np.random.default_rng(seed)
        alice = distribute(3, 16, NoiseModel(), rng).alice_bits
        received = build_proof(alice, 3, c)
        try:
            forged = forge_proof(received, 3, 1 - c, strategy, rng)
        except DegenerateForgeError:
            return
        hidden = received.cryptic_mask()
        assert np.array_equal(forged.cryptic_mask(), ~hidden)
        assert np.all(forged.cells[hidden, 2] == 1 - c)
        assert not (forged.cells[hidden] == CRYPTIC).any()
