"""
Frame-level entropy scores and iterative diverse frame selection.

Each detected box carries D(b), its Hamming distance to the nearest source
ground-truth pattern. A frame's entropy over the distribution of D(b) is its
intra-frame diversity; the inter-frame distance to the frames already picked
keeps the selection from collapsing onto one kind of scene.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from napselect.config import DEFAULT_MIN_BOXES, DEFAULT_PROPOSAL_FACTOR, DEFAULT_TARGET_COUNT
from napselect.exceptions import ConfigurationError, DataFormatError, EmptyInputError
from napselect.models import Role
from napselect.selection.bank import (
    FrameBitCounts, PatternBank, batch_nearest, frame_bit_counts_from_words, mean_pairwise_hamming,
)
from napselect.selection.patterns import LayerPatterns

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DistanceHistogram:
    """
    Normalized frequency pi(k) of each distance value k in a frame.
    """
    weights: Mapping[int, float]
    n_boxes: int


@dataclass(frozen=True)
class FrameRecord:
    """
    A target frame's per-box distances, bit counts and entropy.
    """
    frame_id: str
    distances: Tuple[int, ...]
    bit_counts: FrameBitCounts
    entropy: float

    def __post_init__(self):
        if len(self.distances) != self.bit_counts.n_boxes:
            raise DataFormatError(
                f"frame {self.frame_id}: {len(self.distances)} distances for {self.bit_counts.n_boxes} boxes"
            )
        if self.entropy < 0:
            raise DataFormatError(f"frame {self.frame_id}: negative entropy")

    @property
    def n_boxes(self) -> int:
        return self.bit_counts.n_boxes


@dataclass(frozen=True)
class SelectionConfig:
    """
    Selection parameters. ``proposal_size`` defaults to 10 x ``target_count``.
    """
    target_count: int = DEFAULT_TARGET_COUNT
    proposal_size: Optional[int] = None
    min_boxes: int = DEFAULT_MIN_BOXES
    score_threshold: Optional[float] = None

    def __post_init__(self):
        if self.target_count < 1:
            raise ConfigurationError(f"target count N must be >= 1, got {self.target_count}")
        if self.proposal_size is not None and self.proposal_size < 1:
            raise ConfigurationError(f"proposal size K must be >= 1, got {self.proposal_size}")
        if self.min_boxes < 0:
            raise ConfigurationError(f"min_boxes must be >= 0, got {self.min_boxes}")

    @property
    def k(self) -> int:
        return self.proposal_size if self.proposal_size is not None else DEFAULT_PROPOSAL_FACTOR * self.target_count

    def to_dict(self) -> dict:
        return {
            "proposal_size": self.k,
            "target_count": self.target_count,
            "min_boxes": self.min_boxes,
            "score_threshold": self.score_threshold,
        }


@dataclass(frozen=True)
class SelectionStep:
    """
    Scores recorded for the frame picked at one iteration.
    """
    iteration: int
    frame_id: str
    entropy: float
    dist: Optional[float] = None
    entropy_norm: Optional[float] = None
    dist_norm: Optional[float] = None
    product: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "iter": self.iteration,
            "frame": self.frame_id,
            "H": self.entropy,
            "Dist": self.dist,
            "H_norm": self.entropy_norm,
            "Dist_norm": self.dist_norm,
            "product": self.product,
        }


@dataclass(frozen=True)
class SelectionResult:
    """
    Ordered selection with per-iteration scores and the config that produced it.
    """
    config: SelectionConfig
    steps: Tuple[SelectionStep, ...] = field(default_factory=tuple)
    strategy: str = "diverse"
    seed: Optional[int] = None

    @property
    def frame_ids(self) -> List[str]:
        return [step.frame_id for step in self.steps]

    def __len__(self) -> int:
        return len(self.steps)

    def to_dict(self) -> dict:
        config = self.config.to_dict()
        config["strategy"] = self.strategy
        if self.seed is not None:
            config["seed"] = self.seed
        return {"config": config, "selected": [step.to_dict() for step in self.steps]}


def distance_histogram(dists: Sequence[int]) -> DistanceHistogram:
    """pi(k) = count(k) / |dists|."""
    if len(dists) == 0:
        raise EmptyInputError("distance histogram needs at least one distance")
    counts = Counter(int(d) for d in dists)
    n = len(dists)
    return DistanceHistogram(weights={k: counts[k] / n for k in sorted(counts)}, n_boxes=n)


def entropy(histogram: DistanceHistogram) -> float:
    """Shannon entropy in nats; 0 for a single support point."""
    value = -math.fsum(p * math.log(p) for p in histogram.weights.values())
    return value if value > 0 else 0.0


def build_frame_record(frame_id: str, distances: Sequence[int], bit_counts: FrameBitCounts) -> FrameRecord:
    """Score one frame from its per-box distances and bit counts."""
    distances = tuple(int(d) for d in distances)
    return FrameRecord(
        frame_id=frame_id,
        distances=distances,
        bit_counts=bit_counts,
        entropy=entropy(distance_histogram(distances)),
    )


def build_frame_records(
    detections: LayerPatterns,
    bank: PatternBank,
    score_threshold: Optional[float] = None,
) -> List[FrameRecord]:
    """
    Score every target frame of a layer's detection rows.

    Detections scoring below ``score_threshold`` are dropped before distances
    and bit counts are computed; detections without a score are kept.
    Frames left without detections are not returned.
    """
    records = []
    dropped_frames = 0
    for frame_id, rows in detections.group_by_frame(Role.DET).items():
        if score_threshold is not None:
            rows = [i for i in rows if detections.scores[i] is None or detections.scores[i] >= score_threshold]
        if not rows:
            dropped_frames += 1
            continue
        words = detections.words[np.asarray(rows, dtype=np.int64)]
        distances = batch_nearest(bank, words)
        records.append(build_frame_record(frame_id, distances, frame_bit_counts_from_words(words, detections.dim)))
    if dropped_frames:
        logger.warning(f"{dropped_frames} frames have no detections above score {score_threshold}")
    logger.info(f"Scored {len(records)} frames on layer {detections.layer_id}")
    return records


def frame_dist(
    candidate: FrameRecord,
    selected: Sequence[FrameRecord],
    cache: Optional[Dict[Tuple[str, str], float]] = None,
) -> float:
    """
    Mean over selected frames of the mean pairwise Hamming distance to ``candidate``;
    1.0 when nothing is selected yet.

    Args:
        candidate: Frame being scored
        selected: Frames already selected, in selection order
        cache: Optional frame-pair distance cache keyed by (candidate id, selected id)
    """
    if candidate.n_boxes < 1 or any(frame.n_boxes < 1 for frame in selected):
        raise EmptyInputError("frame distance needs frames with at least one box")
    if not selected:
        return 1.0
    pair_distances = []
    for frame in selected:
        key = (candidate.frame_id, frame.frame_id)
        if cache is not None and key in cache:
            value = cache[key]
        else:
            value = mean_pairwise_hamming(candidate.bit_counts, frame.bit_counts)
            if cache is not None:
                cache[key] = value
        pair_distances.append(value)
    return math.fsum(pair_distances) / len(pair_distances)


def max_norm(values: Sequence[float]) -> List[float]:
    """Divide by the maximum; a zero maximum maps every value to 1.0."""
    if len(values) == 0:
        raise EmptyInputError("max_norm needs at least one value")
    if min(values) < 0:
        raise DataFormatError("max_norm requires non-negative values")
    peak = max(values)
    if peak == 0:
        return [1.0] * len(values)
    return [v / peak for v in values]


def _eligible_frames(frames: Sequence[FrameRecord], cfg: SelectionConfig) -> List[FrameRecord]:
    seen = set()
    for frame in frames:
        if frame.frame_id in seen:
            raise DataFormatError(f"duplicate frame id {frame.frame_id}")
        seen.add(frame.frame_id)

    min_boxes = max(cfg.min_boxes, 1)
    eligible = sorted((f for f in frames if f.n_boxes >= min_boxes), key=lambda f: f.frame_id)
    if len(eligible) < len(frames):
        logger.warning(f"{len(frames) - len(eligible)} frames have fewer than {min_boxes} boxes and are ineligible")
    if not eligible:
        raise EmptyInputError("no eligible frames to select from")
    return eligible


def select_frames(frames: Sequence[FrameRecord], cfg: SelectionConfig) -> SelectionResult:
    """
    Iterative diverse frame selection.

    Each iteration takes the top-K unselected frames by entropy, scores each by
    its distance to the frames selected so far, max-normalizes both factors over
    the proposal set and picks the largest product. Ties are broken by frame id.

    Args:
        frames: Scored target frames
        cfg: Selection parameters

    Returns:
        SelectionResult with min(N, #eligible) steps

    Raises:
        EmptyInputError: If no frame is eligible
    """
    remaining = _eligible_frames(frames, cfg)
    target = min(cfg.target_count, len(remaining))
    logger.info(f"Selecting {target} of {len(remaining)} eligible frames (K={cfg.k})")

    cache: Dict[Tuple[str, str], float] = {}
    selected: List[FrameRecord] = []
    steps: List[SelectionStep] = []

    for iteration in range(1, target + 1):
        proposals = sorted(remaining, key=lambda f: (-f.entropy, f.frame_id))[:cfg.k]
        dists = [frame_dist(frame, selected, cache) for frame in proposals]
        entropy_norm = max_norm([frame.entropy for frame in proposals])
        dist_norm = max_norm(dists)
        products = [h * d for h, d in zip(entropy_norm, dist_norm)]

        best = min(range(len(proposals)), key=lambda i: (-products[i], proposals[i].frame_id))
        chosen = proposals[best]
        steps.append(SelectionStep(
            iteration=iteration,
            frame_id=chosen.frame_id,
            entropy=chosen.entropy,
            dist=dists[best],
            entropy_norm=entropy_norm[best],
            dist_norm=dist_norm[best],
            product=products[best],
        ))
        logger.debug(f"Iteration {iteration}: selected {chosen.frame_id} (product {products[best]:.4f})")
        selected.append(chosen)
        remaining = [frame for frame in remaining if frame.frame_id != chosen.frame_id]

    return SelectionResult(config=cfg, steps=tuple(steps))


def random_frames(frames: Sequence[FrameRecord], cfg: SelectionConfig, seed: int = 0) -> SelectionResult:
    """
    Baseline: uniform random sample of min(N, #eligible) eligible frames.
    """
    eligible = _eligible_frames(frames, cfg)
    target = min(cfg.target_count, len(eligible))
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(eligible), size=target, replace=False)
    steps = tuple(
        SelectionStep(iteration=i + 1, frame_id=eligible[j].frame_id, entropy=eligible[j].entropy)
        for i, j in enumerate(picks)
    )
    logger.info(f"Randomly selected {target} of {len(eligible)} eligible frames (seed {seed})")
    return SelectionResult(config=cfg, steps=steps, strategy="random", seed=seed)
