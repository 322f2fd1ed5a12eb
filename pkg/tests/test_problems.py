import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from poolea.errors import ConfigError, InvalidArgument
from poolea.genome import as_genome, make_rng
from poolea.problems import (
    PPeaksInstance,
    eval_mmdp,
    eval_ppeaks,
    is_solved,
    make_mmdp,
    make_ppeaks,
    parse_problem,
    unitation_fitness,
)


def ppeaks_oracle(peaks, g):
    """Straight transcription: (1/N) max_i (N - H(g, peak_i)) in pure Python."""
    n = len(g)
    return max(n - sum(a != b for a, b in zip(g, p)) for p in peaks) / n


def mmdp_oracle(bits):
    table = {0: 1.0, 1: 0.0, 2: 0.360384, 3: 0.640576, 4: 0.360384, 5: 0.0, 6: 1.0}
    return sum(table[sum(bits[i:i + 6])] for i in range(0, len(bits), 6))


def fixed_peaks(*peaks):
    arr = np.array([as_genome(p) for p in peaks])
    return PPeaksInstance(P=len(peaks), N=arr.shape[1], generator_seed=-1, peaks=arr)


class TestPPeaks:
    def test_reference_sizes(self):
        inst = make_ppeaks(100, 64, 7)
        assert inst.peaks.shape == (100, 64)
        assert inst.optimum_fitness == 1.0

    def test_minimal(self):
        assert make_ppeaks(1, 4, 0).peaks.shape == (1, 4)

    def test_regeneration_is_identical(self):
        assert np.array_equal(make_ppeaks(10, 16, 3).peaks, make_ppeaks(10, 16, 3).peaks)
        assert not np.array_equal(make_ppeaks(10, 16, 3).peaks, make_ppeaks(10, 16, 4).peaks)

    @pytest.mark.parametrize("P, N", [(0, 4), (3, 0)])
    def test_invalid_sizes(self, P, N):
        with pytest.raises(InvalidArgument):
            make_ppeaks(P, N, 0)

    def test_peak_scores_one(self):
        inst = make_ppeaks(5, 20, 11)
        for peak in inst.peaks:
            assert eval_ppeaks(inst, peak) == 1.0

    def test_complement_of_single_peak_scores_zero(self):
        inst = make_ppeaks(1, 12, 5)
        assert eval_ppeaks(inst, 1 - inst.peaks[0]) == 0.0

    def test_hand_example(self):
        inst = fixed_peaks("1100", "0011")
        assert eval_ppeaks(inst, "1111") == 0.5

    def test_length_mismatch(self):
        with pytest.raises(InvalidArgument):
            eval_ppeaks(make_ppeaks(2, 8, 0), "0101")
        with pytest.raises(InvalidArgument):
            make_ppeaks(2, 8, 0).evaluate_batch(np.zeros((3, 7), np.uint8))

    def test_batch_matches_scalar(self):
        inst = make_ppeaks(100, 64, 7)
        pop = (make_rng(1).random((500, 64)) < 0.5).astype(np.uint8)
        batch = inst.evaluate_batch(pop)
        assert np.array_equal(batch, [eval_ppeaks(inst, g) for g in pop])

    @given(st.integers(0, 2**32), st.integers(1, 6), st.integers(1, 16))
    def test_range(self, seed, P, N):
        inst = make_ppeaks(P, N, seed)
        g = (make_rng(seed + 1).random(N) < 0.5).astype(np.uint8)
        assert 0.0 <= eval_ppeaks(inst, g) <= 1.0


class TestUnitation:
    def test_table_exact(self):
        assert [unitation_fitness(u) for u in range(7)] == [
            1.0, 0.0, 0.360384, 0.640576, 0.360384, 0.0, 1.0
        ]

    @pytest.mark.parametrize("u", [-1, 7])
    def test_out_of_range(self, u):
        with pytest.raises(InvalidArgument):
            unitation_fitness(u)


class TestMmdp:
    @pytest.mark.parametrize(
        "k, bits, expected",
        [(1, "000000", 1.0), (1, "111000", 0.640576), (2, "111111000000", 2.0)],
    )
    def test_examples(self, k, bits, expected):
        assert eval_mmdp(make_mmdp(k), bits) == expected

    def test_wrong_length(self):
        with pytest.raises(InvalidArgument):
            eval_mmdp(make_mmdp(2), "000000")

    def test_exhaustive_k2_optima(self):
        inst = make_mmdp(2)
        all_genomes = np.array(list(itertools.product((0, 1), repeat=12)), dtype=np.uint8)
        fitness = inst.evaluate_batch(all_genomes)
        optima = {"".join(map(str, g)) for g, f in zip(all_genomes, fitness) if f == 2.0}
        assert optima == {"000000000000", "000000111111", "111111000000", "111111111111"}
        assert fitness.max() == 2.0
        # exhaustive check of the batch path against the pure-Python oracle
        assert np.allclose(fitness, [mmdp_oracle(g.tolist()) for g in all_genomes], rtol=0, atol=1e-12)

    def test_batch_matches_scalar_exactly(self):
        inst = make_mmdp(20)
        pop = (make_rng(3).random((400, 120)) < 0.5).astype(np.uint8)
        assert np.array_equal(inst.evaluate_batch(pop), [eval_mmdp(inst, g) for g in pop])

    @given(st.lists(st.integers(0, 6), min_size=1, max_size=20), st.randoms(use_true_random=False))
    def test_block_permutation_and_complement_invariance(self, unitations, rnd):
        blocks = [[1] * u + [0] * (6 - u) for u in unitations]
        for b in blocks:
            rnd.shuffle(b)
        inst = make_mmdp(len(blocks))
        base = eval_mmdp(inst, sum(blocks, []))
        shuffled = blocks[:]
        rnd.shuffle(shuffled)
        assert eval_mmdp(inst, sum(shuffled, [])) == pytest.approx(base, abs=1e-12)
        flipped = [[1 - x for x in b] if rnd.random() < 0.5 else b for b in blocks]
        assert eval_mmdp(inst, sum(flipped, [])) == pytest.approx(base, abs=1e-12)
        assert 0.0 <= base <= inst.k


class TestIsSolved:
    def test_ppeaks_optimum(self):
        assert is_solved(make_ppeaks(2, 8, 0), 1.0)

    def test_mmdp_optimum(self):
        assert is_solved(make_mmdp(20), 20.0)

    def test_mmdp_one_deceptive_block(self):
        inst = make_mmdp(20)
        fitness = eval_mmdp(inst, "111000" + "000000" * 19)
        assert fitness == pytest.approx(19.640576)
        assert not is_solved(inst, fitness)


class TestDescriptors:
    def test_roundtrip(self):
        for text in ("mmdp:k=20", "ppeaks:P=100,N=64,seed=7"):
            assert parse_problem(text).descriptor == text

    @pytest.mark.parametrize("bad", ["knapsack:n=3", "mmdp:k=x", "mmdp:q=3", "mmdp:k=0", "ppeaks:P"])
    def test_rejects(self, bad):
        with pytest.raises(ConfigError):
            parse_problem(bad)
