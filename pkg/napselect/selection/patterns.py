"""
Binary activation patterns: top-half clipping, binarization, bit packing
and Hamming distance.

Bits are packed little-endian into 64-bit words (bit j lives in word j // 64
at position j % 64) and pad bits above ``dim`` are always zero, so
XOR + popcount needs no masking.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from napselect.exceptions import DimensionMismatchError, EmptyInputError, DataFormatError
from napselect.models import ActivationRecord, Role

logger = logging.getLogger(__name__)

WORD_BITS = 64

# SWAR popcount constants
_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


def n_words(dim: int) -> int:
    """Number of 64-bit words needed for ``dim`` bits."""
    return (dim + WORD_BITS - 1) // WORD_BITS


def popcount64(arr: np.ndarray) -> np.ndarray:
    """Elementwise popcount of a uint64 array."""
    arr = np.asarray(arr, dtype=np.uint64)
    arr = arr - ((arr >> np.uint64(1)) & _M1)
    arr = (arr & _M2) + ((arr >> np.uint64(2)) & _M2)
    arr = (arr + (arr >> np.uint64(4))) & _M4
    return (arr * _H01) >> np.uint64(56)


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """
    Pack a boolean (n, d) matrix (or a length-d vector) into (n, ceil(d/64)) uint64 words.
    """
    bits = np.atleast_2d(np.asarray(bits, dtype=bool))
    n, dim = bits.shape
    padded = np.zeros((n, n_words(dim) * WORD_BITS), dtype=bool)
    padded[:, :dim] = bits
    packed = np.ascontiguousarray(np.packbits(padded, axis=1, bitorder="little"))
    return packed.view("<u8").astype(np.uint64)


def unpack_bits(words: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of pack_bits: (n, W) uint64 words to an (n, dim) boolean matrix."""
    words = np.atleast_2d(np.asarray(words, dtype=np.uint64))
    raw = np.ascontiguousarray(words.astype("<u8")).view(np.uint8)
    return np.unpackbits(raw, axis=1, bitorder="little")[:, :dim].astype(bool)


@dataclass(frozen=True, eq=False)
class BinaryPattern:
    """
    Immutable bit-packed activation pattern of ``dim`` bits.
    """
    dim: int
    words: np.ndarray

    def __post_init__(self):
        if self.dim < 1:
            raise EmptyInputError("pattern dimension must be positive")
        words = np.array(self.words, dtype=np.uint64).reshape(-1)
        if words.shape[0] != n_words(self.dim):
            raise DimensionMismatchError(
                f"{self.dim}-bit pattern needs {n_words(self.dim)} words, got {words.shape[0]}"
            )
        tail = self.dim % WORD_BITS
        if tail and int(words[-1]) >> tail:
            raise DataFormatError("pattern pad bits above dim must be zero")
        words.setflags(write=False)
        object.__setattr__(self, "words", words)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryPattern):
            return NotImplemented
        return self.dim == other.dim and np.array_equal(self.words, other.words)

    def __hash__(self) -> int:
        return hash((self.dim, self.words.tobytes()))

    def __repr__(self) -> str:
        return f"BinaryPattern({self.to_string()!r})" if self.dim <= 64 else f"BinaryPattern(dim={self.dim})"

    @classmethod
    def from_bits(cls, bits: Iterable) -> 'BinaryPattern':
        bits = np.asarray(bits if isinstance(bits, np.ndarray) else list(bits), dtype=bool).reshape(-1)
        if bits.size == 0:
            raise EmptyInputError("cannot build a pattern from an empty bit vector")
        return cls(dim=bits.shape[0], words=pack_bits(bits)[0])

    @classmethod
    def from_string(cls, text: str) -> 'BinaryPattern':
        """Build from a string such as "1010", where character j is bit j."""
        if set(text) - {"0", "1"}:
            raise DataFormatError(f"pattern string may only contain 0 and 1, got {text!r}")
        return cls.from_bits([c == "1" for c in text])

    def to_bits(self) -> np.ndarray:
        return unpack_bits(self.words[np.newaxis, :], self.dim)[0]

    def to_string(self) -> str:
        return "".join("1" if b else "0" for b in self.to_bits())

    def popcount(self) -> int:
        return int(popcount64(self.words).sum())


def _as_vector(values: Sequence[float]) -> np.ndarray:
    vector = np.asarray(values, dtype=np.float64)
    if vector.ndim != 1 or vector.size == 0:
        raise EmptyInputError("activation vector must be a non-empty 1-D sequence")
    if not np.all(np.isfinite(vector)):
        raise DataFormatError("activation vector must be finite")
    return vector


def _top_half_mask(matrix: np.ndarray) -> np.ndarray:
    """
    Row-wise mask of the d - floor(d/2) largest entries; ties at the cut keep
    lower indices first.
    """
    n, dim = matrix.shape
    keep = dim - dim // 2
    order = np.argsort(-matrix, axis=1, kind="stable")[:, :keep]
    mask = np.zeros((n, dim), dtype=bool)
    mask[np.arange(n)[:, np.newaxis], order] = True
    return mask


def clip_top_half(values: Sequence[float]) -> np.ndarray:
    """
    Zero the floor(d/2) smallest entries, keeping the rest in place.

    Args:
        values: Latent ReLU vector of length d

    Returns:
        Clipped vector of length d
    """
    vector = _as_vector(values)
    mask = _top_half_mask(vector[np.newaxis, :])[0]
    return np.where(mask, vector, 0.0)


def binarize(clipped: Sequence[float]) -> BinaryPattern:
    """Set bit j iff clipped[j] is strictly positive."""
    vector = _as_vector(clipped)
    return BinaryPattern.from_bits(vector > 0)


def extract_pattern(values: Sequence[float]) -> BinaryPattern:
    """Activation pattern of one box: binarize(clip_top_half(values))."""
    return binarize(clip_top_half(values))


def extract_patterns(matrix: np.ndarray) -> np.ndarray:
    """
    Row-wise extract_pattern over an (n, d) matrix.

    Returns:
        (n, ceil(d/64)) uint64 packed patterns
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] == 0:
        raise EmptyInputError("activation matrix must be (n, d) with d >= 1")
    if not np.all(np.isfinite(matrix)):
        raise DataFormatError("activation matrix must be finite")
    if matrix.shape[0] == 0:
        return np.zeros((0, n_words(matrix.shape[1])), dtype=np.uint64)
    bits = _top_half_mask(matrix) & (matrix > 0)
    return pack_bits(bits)


def hamming(p: BinaryPattern, q: BinaryPattern) -> int:
    """Number of differing bit positions between two patterns."""
    if p.dim != q.dim:
        raise DimensionMismatchError(f"cannot compare {p.dim}-bit and {q.dim}-bit patterns")
    return int(popcount64(np.bitwise_xor(p.words, q.words)).sum())


def stack_patterns(patterns: Sequence[BinaryPattern]) -> Tuple[int, np.ndarray]:
    """
    Stack patterns into a dense (n, W) word matrix.

    Returns:
        (dim, words); dim is 0 and words empty when no patterns are given
    """
    if len(patterns) == 0:
        return 0, np.zeros((0, 0), dtype=np.uint64)
    dim = patterns[0].dim
    for pattern in patterns:
        if pattern.dim != dim:
            raise DimensionMismatchError(f"mixed pattern dimensions {dim} and {pattern.dim}")
    return dim, np.vstack([p.words for p in patterns])


@dataclass(frozen=True, eq=False)
class LayerPatterns:
    """
    All patterns of one layer with per-row metadata, in dump order.
    """
    layer_id: str
    dim: int
    words: np.ndarray
    frame_ids: Tuple[str, ...]
    box_ids: Tuple[str, ...]
    roles: Tuple[Role, ...]
    scores: Tuple[Optional[float], ...]

    def __post_init__(self):
        n = self.words.shape[0]
        if not (len(self.frame_ids) == len(self.box_ids) == len(self.roles) == len(self.scores) == n):
            raise DataFormatError(f"layer {self.layer_id}: metadata length does not match {n} patterns")
        if self.words.shape[1] != n_words(self.dim):
            raise DimensionMismatchError(f"layer {self.layer_id}: words do not hold {self.dim} bits")

    def __len__(self) -> int:
        return self.words.shape[0]

    def pattern(self, index: int) -> BinaryPattern:
        return BinaryPattern(dim=self.dim, words=self.words[index])

    def rows(self, role: Role) -> np.ndarray:
        """Row indices carrying ``role``."""
        return np.array([i for i, r in enumerate(self.roles) if r is role], dtype=np.int64)

    def role_words(self, role: Role) -> np.ndarray:
        return self.words[self.rows(role)]

    def group_by_frame(self, role: Role = Role.DET) -> Dict[str, List[int]]:
        """Row indices of ``role`` grouped per frame, frames in identifier order."""
        groups: Dict[str, List[int]] = {}
        for index, (frame_id, r) in enumerate(zip(self.frame_ids, self.roles)):
            if r is role:
                groups.setdefault(frame_id, []).append(index)
        return OrderedDict(sorted(groups.items()))


def extract_layer_patterns(records: Sequence[ActivationRecord]) -> Dict[str, LayerPatterns]:
    """
    Group activation records by layer and extract their patterns.

    Args:
        records: Activation records in dump order

    Returns:
        Mapping layer_id -> LayerPatterns, layers in identifier order
    """
    by_layer: Dict[str, List[ActivationRecord]] = {}
    for record in records:
        by_layer.setdefault(record.layer_id, []).append(record)

    result: Dict[str, LayerPatterns] = OrderedDict()
    for layer_id in sorted(by_layer):
        layer_records = by_layer[layer_id]
        dim = layer_records[0].dim
        for record in layer_records:
            if record.dim != dim:
                raise DimensionMismatchError(
                    f"layer {layer_id}: record {record.frame_id}/{record.box_id} has d={record.dim}, expected {dim}"
                )
        matrix = np.vstack([record.values for record in layer_records])
        result[layer_id] = LayerPatterns(
            layer_id=layer_id,
            dim=dim,
            words=extract_patterns(matrix),
            frame_ids=tuple(r.frame_id for r in layer_records),
            box_ids=tuple(r.box_id for r in layer_records),
            roles=tuple(r.role for r in layer_records),
            scores=tuple(r.score for r in layer_records),
        )
        logger.info(f"Extracted {len(layer_records)} patterns of dimension {dim} for layer {layer_id}")
    return result
