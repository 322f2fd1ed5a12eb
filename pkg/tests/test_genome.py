import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poolea.errors import InvalidArgument, InvalidState
from poolea.genome import (
    Individual,
    as_genome,
    bit_flip_mutation,
    bit_flip_mutation_batch,
    genome_to_str,
    hamming,
    make_rng,
    random_genome,
    tournament_select,
    tournament_select_batch,
    uniform_crossover,
    uniform_crossover_batch,
)


class StubRng:
    """Deterministic stand-in for the few Generator methods the operators use."""

    def __init__(self, floats=0.0, ints=None):
        self.floats = floats
        self.ints = ints

    def random(self, size):
        return np.full(size, self.floats)

    def integers(self, low, high, size):
        return np.asarray(self.ints[:size])


genomes = st.lists(st.integers(0, 1), min_size=1, max_size=64).map(as_genome)
seeds = st.integers(0, 2**64 - 1)


def pair_of_genomes():
    return st.integers(1, 64).flatmap(
        lambda n: st.tuples(
            st.lists(st.integers(0, 1), min_size=n, max_size=n).map(as_genome),
            st.lists(st.integers(0, 1), min_size=n, max_size=n).map(as_genome),
        )
    )


class TestRandomGenome:
    def test_length_and_alphabet(self):
        g = random_genome(8, make_rng(3))
        assert g.shape == (8,)
        assert set(np.unique(g)) <= {0, 1}

    def test_deterministic(self):
        assert np.array_equal(random_genome(4, make_rng(99)), random_genome(4, make_rng(99)))

    def test_bit_mean(self):
        g = random_genome(10_000, make_rng(12345))
        assert 0.45 <= g.mean() <= 0.55

    def test_zero_length(self):
        with pytest.raises(InvalidArgument):
            random_genome(0, make_rng(0))

    def test_stream_keys_are_independent(self):
        a = random_genome(64, make_rng(7, 0, 0))
        b = random_genome(64, make_rng(7, 0, 1))
        assert not np.array_equal(a, b)


class TestGenomeEncoding:
    def test_string_roundtrip(self):
        assert genome_to_str(as_genome("0110")) == "0110"

    @pytest.mark.parametrize("bad", ["", "012", [0, 2], [[0, 1]]])
    def test_rejects_non_bits(self, bad):
        with pytest.raises(InvalidArgument):
            as_genome(bad)


class TestHamming:
    @pytest.mark.parametrize(
        "a, b, expected",
        [("1010", "1010", 0), ("0000", "1111", 4), ("110010", "101010", 2)],
    )
    def test_examples(self, a, b, expected):
        assert hamming(a, b) == expected

    def test_length_mismatch(self):
        with pytest.raises(InvalidArgument):
            hamming("101", "10")

    @given(pair_of_genomes())
    def test_symmetric_and_bounded(self, ab):
        a, b = ab
        d = hamming(a, b)
        assert d == hamming(b, a)
        assert 0 <= d <= a.size
        # oracle: positionwise count in pure Python
        assert d == sum(x != y for x, y in zip(a.tolist(), b.tolist()))


class TestMutation:
    def test_rate_zero_is_identity(self):
        g = random_genome(50, make_rng(1))
        assert np.array_equal(bit_flip_mutation(g, 0.0, make_rng(2)), g)

    def test_rate_one_is_complement(self):
        g = random_genome(50, make_rng(1))
        assert np.array_equal(bit_flip_mutation(g, 1.0, make_rng(2)), 1 - g)

    def test_input_untouched(self):
        g = random_genome(50, make_rng(1))
        before = g.copy()
        bit_flip_mutation(g, 0.5, make_rng(2))
        assert np.array_equal(g, before)

    def test_flip_count_binomial_bounds(self):
        g = np.zeros(10_000, dtype=np.uint8)
        flipped = int(bit_flip_mutation(g, 0.01, make_rng(5)).sum())
        # mean 100, sd sqrt(10000*0.01*0.99) ~ 9.95; +-4 sd
        assert 60 <= flipped <= 140

    @pytest.mark.parametrize("rate", [-0.1, 1.5])
    def test_rate_out_of_range(self, rate):
        with pytest.raises(InvalidArgument):
            bit_flip_mutation(as_genome("0101"), rate, make_rng(0))
        with pytest.raises(InvalidArgument):
            bit_flip_mutation_batch(np.zeros((2, 4), np.uint8), rate, make_rng(0))

    def test_batch_extremes(self):
        pop = (make_rng(4).random((30, 20)) < 0.5).astype(np.uint8)
        assert np.array_equal(bit_flip_mutation_batch(pop, 0.0, make_rng(1)), pop)
        assert np.array_equal(bit_flip_mutation_batch(pop, 1.0, make_rng(1)), 1 - pop)

    def test_batch_flip_counts_match_binomial(self):
        # per-row flip counts over many rows should follow Binomial(L, r)
        rows, length, rate = 20_000, 40, 0.05
        out = bit_flip_mutation_batch(np.zeros((rows, length), np.uint8), rate, make_rng(8))
        counts = np.bincount(out.sum(axis=1), minlength=length + 1)
        expected = np.array([math.comb(length, j) * rate**j * (1 - rate) ** (length - j)
                             for j in range(length + 1)]) * rows
        keep = expected >= 5
        chi2 = float((((counts[keep] - expected[keep]) ** 2) / expected[keep]).sum())
        # 99.9% quantile of chi2 with ~8 degrees of freedom is ~26
        assert chi2 < 30, chi2
        # flips land on every column about equally often
        per_col = out.mean(axis=0)
        assert np.all(np.abs(per_col - rate) < 5 * math.sqrt(rate * (1 - rate) / rows))

    @settings(max_examples=50)
    @given(genomes, st.floats(0, 1), seeds)
    def test_preserves_length(self, g, rate, seed):
        assert bit_flip_mutation(g, rate, make_rng(seed)).size == g.size


class TestCrossover:
    def test_identical_parents(self):
        a = random_genome(32, make_rng(1))
        assert np.array_equal(uniform_crossover(a, a, make_rng(2)), a)

    def test_complementary_parents_reach_everything(self):
        a, b = as_genome("0000"), as_genome("1111")
        children = {genome_to_str(uniform_crossover(a, b, make_rng(s))) for s in range(400)}
        assert len(children) == 16

    def test_forced_mask_takes_parent_a(self):
        a, b = as_genome("101100"), as_genome("010011")
        assert np.array_equal(uniform_crossover(a, b, StubRng(floats=0.0)), a)
        assert np.array_equal(uniform_crossover(a, b, StubRng(floats=0.99)), b)

    def test_length_mismatch(self):
        with pytest.raises(InvalidArgument):
            uniform_crossover(as_genome("01"), as_genome("011"), make_rng(0))

    @given(pair_of_genomes(), seeds)
    def test_child_bits_come_from_a_parent(self, ab, seed):
        a, b = ab
        child = uniform_crossover(a, b, make_rng(seed))
        assert child.size == a.size
        assert np.all((child == a) | (child == b))

    @given(pair_of_genomes(), seeds, st.floats(0, 1))
    def test_batch_child_bits_come_from_a_parent(self, ab, seed, rate):
        a, b = ab
        A = np.stack([a, b, a])
        B = np.stack([b, a, a])
        child = uniform_crossover_batch(A, B, make_rng(seed), rate=rate)
        assert child.shape == A.shape
        assert np.all((child == A) | (child == B))

    def test_batch_rate_zero_copies_first_parent(self):
        A = np.zeros((50, 30), np.uint8)
        B = np.ones((50, 30), np.uint8)
        assert np.array_equal(uniform_crossover_batch(A, B, make_rng(3), rate=0.0), A)

    def test_batch_is_fair_coin(self):
        A = np.zeros((2000, 37), np.uint8)
        B = np.ones((2000, 37), np.uint8)
        child = uniform_crossover_batch(A, B, make_rng(3))
        assert abs(child.mean() - 0.5) < 0.01
        # partial crossover: expected share of B bits is rate / 2
        child = uniform_crossover_batch(A, B, make_rng(4), rate=0.5)
        assert abs(child.mean() - 0.25) < 0.01


def pop_with(fitness):
    return [Individual(np.zeros(4, np.uint8), f) for f in fitness]


class TestTournament:
    def test_single_member(self):
        assert tournament_select(pop_with([0.3]), 3, make_rng(0)) == 0

    def test_dominance_with_forced_sample(self):
        pop = pop_with([0.1, 0.9, 0.2, 0.4])
        assert tournament_select(pop, 3, StubRng(ints=[1, 0, 2])) == 1

    def test_ties_go_to_lowest_index(self):
        pop = pop_with([0.5, 0.1, 0.5, 0.5])
        assert tournament_select(pop, 3, StubRng(ints=[3, 2, 0])) == 0
        assert tournament_select(pop, 3, StubRng(ints=[3, 2, 1])) == 2

    def test_empty_population(self):
        with pytest.raises(InvalidState):
            tournament_select([], 3, make_rng(0))

    def test_unevaluated_member(self):
        with pytest.raises(InvalidState):
            tournament_select([Individual(np.zeros(2, np.uint8))], 3, make_rng(0))
        with pytest.raises(InvalidState):
            tournament_select_batch(np.array([0.1, np.nan]), 3, 5, make_rng(0))

    def test_bad_k(self):
        with pytest.raises(InvalidArgument):
            tournament_select(pop_with([1.0]), 0, make_rng(0))

    def test_top_selection_probability_matches_closed_form(self):
        fitness = np.arange(100, dtype=float)
        picks = tournament_select_batch(fitness, 3, 100_000, make_rng(2024))
        expected = 1 - (99 / 100) ** 3
        assert abs(np.mean(picks == 99) - expected) <= 0.005

    def test_scalar_top_selection_probability(self):
        pop = pop_with(range(100))
        rng = make_rng(11)
        hits = sum(tournament_select(pop, 3, rng) == 99 for _ in range(20_000))
        assert abs(hits / 20_000 - (1 - 0.99**3)) <= 0.005

    @given(st.lists(st.floats(0, 10), min_size=1, max_size=30), st.integers(1, 5), seeds)
    def test_never_worse_than_every_sample(self, fitness, k, seed):
        rng_a, rng_b = make_rng(seed), make_rng(seed)
        chosen = tournament_select(pop_with(fitness), k, rng_a)
        sample = rng_b.integers(0, len(fitness), size=k)
        assert fitness[chosen] == max(fitness[i] for i in sample)
        assert chosen in set(sample.tolist())

    def test_determinism(self):
        fitness = make_rng(1).random(200)
        a = tournament_select_batch(fitness, 3, 500, make_rng(9))
        b = tournament_select_batch(fitness, 3, 500, make_rng(9))
        assert np.array_equal(a, b)
