"""
Ground-truth pattern bank with exact minimum-Hamming queries, and per-frame
bit-count summaries for closed-form inter-frame distances.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from numba import njit, prange

from napselect.exceptions import DataFormatError, DimensionMismatchError, EmptyInputError
from napselect.selection.patterns import BinaryPattern, n_words, stack_patterns, unpack_bits

logger = logging.getLogger(__name__)


@njit(nogil=True, cache=True)
def _popcount_u64(x):
    x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
    x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
    x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)


@njit(parallel=True, nogil=True, cache=True)
def _min_hamming(queries, bank):
    n_queries, width = queries.shape
    n_bank = bank.shape[0]
    out = np.empty(n_queries, dtype=np.int64)
    for i in prange(n_queries):
        best = np.int64(width * 64 + 1)
        for j in range(n_bank):
            dist = np.int64(0)
            for k in range(width):
                dist += np.int64(_popcount_u64(queries[i, k] ^ bank[j, k]))
                if dist >= best:
                    break
            if dist < best:
                best = dist
                if best == 0:
                    break
        out[i] = best
    return out


@dataclass(frozen=True, eq=False)
class PatternBank:
    """
    Immutable set of source ground-truth patterns (duplicates retained).
    """
    dim: int
    words: np.ndarray

    def __post_init__(self):
        words = np.ascontiguousarray(self.words, dtype=np.uint64)
        if words.ndim != 2 or words.shape[0] == 0:
            raise EmptyInputError("pattern bank needs at least one pattern")
        if words.shape[1] != n_words(self.dim):
            raise DimensionMismatchError(f"bank words do not hold {self.dim}-bit patterns")
        words.setflags(write=False)
        object.__setattr__(self, "words", words)

    @property
    def count(self) -> int:
        return self.words.shape[0]

    def __len__(self) -> int:
        return self.count

    @classmethod
    def from_words(cls, words: np.ndarray, dim: int) -> 'PatternBank':
        return cls(dim=dim, words=np.array(words, dtype=np.uint64, copy=True))


def build_bank(patterns: Sequence[BinaryPattern]) -> PatternBank:
    """
    Build a bank from ground-truth patterns.

    Raises:
        EmptyInputError: If no patterns are given
        DimensionMismatchError: If pattern dimensions differ
    """
    if len(patterns) == 0:
        raise EmptyInputError("cannot build a bank from zero patterns")
    dim, words = stack_patterns(patterns)
    logger.debug(f"Built pattern bank of {words.shape[0]} patterns, dim {dim}")
    return PatternBank(dim=dim, words=words)


def _query_words(bank: PatternBank, queries: Union[Sequence[BinaryPattern], np.ndarray]) -> np.ndarray:
    if isinstance(queries, np.ndarray):
        words = np.atleast_2d(queries).astype(np.uint64, copy=False)
        if words.shape[0] and words.shape[1] != bank.words.shape[1]:
            raise DimensionMismatchError("query words do not match the bank width")
        return np.ascontiguousarray(words)
    if len(queries) == 0:
        return np.zeros((0, bank.words.shape[1]), dtype=np.uint64)
    dim, words = stack_patterns(queries)
    if dim != bank.dim:
        raise DimensionMismatchError(f"{dim}-bit queries against a {bank.dim}-bit bank")
    return np.ascontiguousarray(words)


def batch_nearest(bank: PatternBank, queries: Union[Sequence[BinaryPattern], np.ndarray]) -> np.ndarray:
    """
    Minimum Hamming distance from each query to the bank, order preserved.

    Args:
        bank: Ground-truth pattern bank
        queries: Patterns, or an (q, W) packed word matrix of the bank's width

    Returns:
        int64 array of distances, one per query
    """
    words = _query_words(bank, queries)
    if words.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return _min_hamming(words, bank.words)


def nearest_distance(bank: PatternBank, pattern: BinaryPattern) -> int:
    """Exact minimum Hamming distance between ``pattern`` and the bank."""
    if pattern.dim != bank.dim:
        raise DimensionMismatchError(f"{pattern.dim}-bit query against a {bank.dim}-bit bank")
    return int(batch_nearest(bank, [pattern])[0])


@dataclass(frozen=True, eq=False)
class FrameBitCounts:
    """
    Per-bit set counts over a frame's patterns.
    """
    dim: int
    counts: np.ndarray
    n_boxes: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.shape != (self.dim,):
            raise DimensionMismatchError(f"bit counts must have length {self.dim}")
        if counts.min(initial=0) < 0 or counts.max(initial=0) > self.n_boxes:
            raise DataFormatError("bit counts must lie in [0, n_boxes]")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)


def frame_bit_counts_from_words(words: np.ndarray, dim: int) -> FrameBitCounts:
    """FrameBitCounts of an (n, W) packed word matrix."""
    words = np.atleast_2d(np.asarray(words, dtype=np.uint64))
    if words.shape[0] == 0:
        raise EmptyInputError("a frame needs at least one pattern")
    counts = unpack_bits(words, dim).sum(axis=0, dtype=np.int64)
    return FrameBitCounts(dim=dim, counts=counts, n_boxes=words.shape[0])


def frame_bit_counts(patterns: Sequence[BinaryPattern]) -> FrameBitCounts:
    """c[j] = number of the frame's patterns with bit j set."""
    if len(patterns) == 0:
        raise EmptyInputError("a frame needs at least one pattern")
    dim, words = stack_patterns(patterns)
    return frame_bit_counts_from_words(words, dim)


def mean_pairwise_hamming(a: FrameBitCounts, b: FrameBitCounts) -> float:
    """
    Mean Hamming distance over all pattern pairs across two frames, from bit counts.

    The numerator sum_j a[j](m - b[j]) + (n - a[j]) b[j] is the exact integer
    total of the brute-force double sum.
    """
    if a.dim != b.dim:
        raise DimensionMismatchError(f"cannot compare {a.dim}-bit and {b.dim}-bit frames")
    if a.n_boxes < 1 or b.n_boxes < 1:
        raise EmptyInputError("both frames need at least one box")
    n, m = a.n_boxes, b.n_boxes
    numerator = int(np.dot(a.counts, m - b.counts)) + int(np.dot(n - a.counts, b.counts))
    return numerator / (n * m)
