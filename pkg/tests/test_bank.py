import time

import numpy as np
import pytest

from napselect.exceptions import DataFormatError, DimensionMismatchError, EmptyInputError
from napselect.selection import (
    BinaryPattern, FrameBitCounts, PatternBank, batch_nearest, build_bank, frame_bit_counts, hamming,
    mean_pairwise_hamming, nearest_distance,
)
from napselect.selection.patterns import pack_bits

from conftest import random_patterns


def P(text):
    return BinaryPattern.from_string(text)


class TestBuildBank:

    def test_two_patterns(self):
        bank = build_bank([P("0000"), P("1111")])
        assert bank.count == 2 and bank.dim == 4

    def test_duplicates_kept(self):
        assert len(build_bank([P("10"), P("10")])) == 2

    def test_empty(self):
        with pytest.raises(EmptyInputError):
            build_bank([])

    def test_mixed_dimensions(self):
        with pytest.raises(DimensionMismatchError):
            build_bank([P("10"), P("101")])

    def test_immutable(self):
        bank = build_bank([P("10")])
        with pytest.raises(ValueError):
            bank.words[0, 0] = 3


class TestNearest:

    def test_closest_of_two(self):
        assert nearest_distance(build_bank([P("0000"), P("1111")]), P("1110")) == 1

    def test_member_is_zero(self):
        assert nearest_distance(build_bank([P("0000"), P("1111")]), P("1111")) == 0

    def test_complement(self):
        assert nearest_distance(build_bank([P("00")]), P("11")) == 2

    def test_query_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            nearest_distance(build_bank([P("00")]), P("000"))

    def test_batch_singleton_and_empty(self):
        bank = build_bank([P("0000"), P("1111")])
        assert list(batch_nearest(bank, [P("1100")])) == [nearest_distance(bank, P("1100"))]
        assert list(batch_nearest(bank, [])) == []

    def test_batch_matches_brute_force(self, rng):
        bank_bits = rng.integers(0, 2, size=(300, 130)).astype(bool)
        query_bits = rng.integers(0, 2, size=(1000, 130)).astype(bool)
        bank = build_bank([BinaryPattern.from_bits(row) for row in bank_bits])
        queries = [BinaryPattern.from_bits(row) for row in query_bits]
        expected = (query_bits[:, np.newaxis, :] != bank_bits[np.newaxis, :, :]).sum(axis=2).min(axis=1)
        np.testing.assert_array_equal(batch_nearest(bank, queries), expected)

    def test_zero_iff_member(self, rng):
        bank_patterns = random_patterns(rng, 50, 40)
        bank = build_bank(bank_patterns)
        for pattern in bank_patterns:
            assert nearest_distance(bank, pattern) == 0
        for pattern in random_patterns(rng, 50, 40):
            assert (nearest_distance(bank, pattern) == 0) == (pattern in set(bank_patterns))

    def test_adding_patterns_never_increases_distance(self, rng):
        base = random_patterns(rng, 20, 64)
        extra = random_patterns(rng, 20, 64)
        queries = random_patterns(rng, 200, 64)
        before = batch_nearest(build_bank(base), queries)
        after = batch_nearest(build_bank(base + extra), queries)
        assert np.all(after <= before)

    def test_word_matrix_queries(self, rng):
        bank = build_bank(random_patterns(rng, 10, 100))
        queries = random_patterns(rng, 5, 100)
        words = np.vstack([q.words for q in queries])
        np.testing.assert_array_equal(batch_nearest(bank, words), batch_nearest(bank, queries))

    @pytest.mark.slow
    def test_large_batch_is_fast(self, rng):
        dim = 512
        bank_bits = rng.integers(0, 2, size=(100_000, dim)).astype(bool)
        query_bits = rng.integers(0, 2, size=(10_000, dim)).astype(bool)
        bank = PatternBank(dim=dim, words=pack_bits(bank_bits))
        queries = pack_bits(query_bits)
        batch_nearest(bank, queries[:10])  # compile

        start = time.perf_counter()
        result = batch_nearest(bank, queries)
        elapsed = time.perf_counter() - start
        assert result.shape == (10_000,)
        assert elapsed < 5.0

        for index in rng.choice(10_000, size=50, replace=False):
            assert result[index] == (bank_bits != query_bits[index]).sum(axis=1).min()


class TestFrameBitCounts:

    @pytest.mark.parametrize("patterns, counts, n", [
        (["10", "01"], [1, 1], 2),
        (["11", "11"], [2, 2], 2),
        (["00"], [0, 0], 1),
    ])
    def test_counts(self, patterns, counts, n):
        result = frame_bit_counts([P(p) for p in patterns])
        assert list(result.counts) == counts
        assert result.n_boxes == n

    def test_empty_frame(self):
        with pytest.raises(EmptyInputError):
            frame_bit_counts([])

    def test_counts_above_box_count_rejected(self):
        with pytest.raises(DataFormatError, match="n_boxes"):
            FrameBitCounts(dim=2, counts=np.array([3, 0]), n_boxes=2)


class TestMeanPairwiseHamming:

    @pytest.mark.parametrize("a, b, expected", [
        (["10", "01"], ["11"], 1.0),
        (["0110"], ["0110"], 0.0),
        (["00"], ["11"], 2.0),
    ])
    def test_examples(self, a, b, expected):
        counts_a = frame_bit_counts([P(p) for p in a])
        counts_b = frame_bit_counts([P(p) for p in b])
        assert mean_pairwise_hamming(counts_a, counts_b) == expected

    def test_matches_brute_force(self, rng):
        for _ in range(500):
            dim = int(rng.integers(1, 257))
            a_bits = rng.integers(0, 2, size=(int(rng.integers(1, 51)), dim)).astype(bool)
            b_bits = rng.integers(0, 2, size=(int(rng.integers(1, 51)), dim)).astype(bool)
            total = int((a_bits[:, np.newaxis, :] != b_bits[np.newaxis, :, :]).sum())
            a = frame_bit_counts([BinaryPattern.from_bits(row) for row in a_bits])
            b = frame_bit_counts([BinaryPattern.from_bits(row) for row in b_bits])
            assert mean_pairwise_hamming(a, b) == total / (len(a_bits) * len(b_bits))

    def test_closed_form_equals_pair_loop(self, rng):
        a = random_patterns(rng, 6, 70)
        b = random_patterns(rng, 9, 70)
        total = sum(hamming(p, q) for p in a for q in b)
        assert mean_pairwise_hamming(frame_bit_counts(a), frame_bit_counts(b)) == total / 54

    def test_symmetric(self, rng):
        a = frame_bit_counts(random_patterns(rng, 7, 33))
        b = frame_bit_counts(random_patterns(rng, 4, 33))
        assert mean_pairwise_hamming(a, b) == mean_pairwise_hamming(b, a)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            mean_pairwise_hamming(frame_bit_counts([P("10")]), frame_bit_counts([P("100")]))
