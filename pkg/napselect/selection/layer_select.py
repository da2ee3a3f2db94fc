"""
Layer selection: rank candidate layers by how well nearest-bank distances
separate true-positive from false-positive detections.

Orientation: AUROC is the probability that a random FP distance exceeds a
random TP distance (ties count half). 1.0 means TP boxes sit closest to the
ground-truth bank and FP boxes farthest, which is the layer we want.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import rankdata

from napselect.exceptions import EmptyInputError
from napselect.models import Role
from napselect.selection.bank import PatternBank, batch_nearest
from napselect.selection.patterns import LayerPatterns

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LayerScore:
    """
    Separation score of one layer; ``auroc`` is None when TP or FP is empty.
    """
    layer_id: str
    auroc: Optional[float]
    n_tp: int
    n_fp: int

    @property
    def defined(self) -> bool:
        return self.auroc is not None

    def to_dict(self) -> dict:
        return {"layer": self.layer_id, "auroc": self.auroc, "n_tp": self.n_tp, "n_fp": self.n_fp}


def auroc(tp_dists: Sequence[int], fp_dists: Sequence[int]) -> float:
    """
    Normalized Mann-Whitney U of FP over TP distances, using midranks for ties.

    Args:
        tp_dists: Nearest-bank distances of true positives
        fp_dists: Nearest-bank distances of false positives

    Returns:
        AUROC in [0, 1]
    """
    tp = np.asarray(tp_dists, dtype=np.float64).reshape(-1)
    fp = np.asarray(fp_dists, dtype=np.float64).reshape(-1)
    if tp.size == 0 or fp.size == 0:
        raise EmptyInputError("AUROC needs at least one TP and one FP distance")
    n_tp, n_fp = tp.size, fp.size
    ranks = rankdata(np.concatenate([tp, fp]), method="average")
    u_fp = ranks[n_tp:].sum() - n_fp * (n_fp + 1) / 2.0
    return float(u_fp / (n_tp * n_fp))


def _sort_key(score: LayerScore) -> Tuple[int, float, str]:
    if score.auroc is None:
        return (1, 0.0, score.layer_id)
    return (0, -score.auroc, score.layer_id)


def rank_layers(per_layer: Mapping[str, Tuple[Sequence[int], Sequence[int]]]) -> List[LayerScore]:
    """
    Score and rank layers; the head of the list is the selected layer.

    Layers missing TP or FP distances are kept with an undefined score and
    ranked last.
    """
    scores = []
    for layer_id, (tp_dists, fp_dists) in per_layer.items():
        n_tp, n_fp = len(tp_dists), len(fp_dists)
        if n_tp == 0 or n_fp == 0:
            logger.warning(f"Layer {layer_id} has {n_tp} TP and {n_fp} FP boxes; AUROC undefined")
            scores.append(LayerScore(layer_id, None, n_tp, n_fp))
        else:
            scores.append(LayerScore(layer_id, auroc(tp_dists, fp_dists), n_tp, n_fp))
    return sorted(scores, key=_sort_key)


def layer_distances(patterns: LayerPatterns) -> Tuple[np.ndarray, np.ndarray]:
    """
    TP and FP nearest-bank distances of one layer, against a bank built from
    the same layer's ground-truth rows.

    Raises:
        EmptyInputError: If the layer has no ground-truth rows
    """
    gt_words = patterns.role_words(Role.GT)
    if gt_words.shape[0] == 0:
        raise EmptyInputError(f"layer {patterns.layer_id} has no ground-truth patterns for a bank")
    bank = PatternBank(dim=patterns.dim, words=gt_words)
    tp = batch_nearest(bank, patterns.role_words(Role.TP))
    fp = batch_nearest(bank, patterns.role_words(Role.FP))
    return tp, fp


def rank_pattern_layers(layers: Mapping[str, LayerPatterns]) -> List[LayerScore]:
    """Rank every layer of an extracted dump; layers without GT rows are undefined."""
    per_layer: Dict[str, Tuple[Sequence[int], Sequence[int]]] = {}
    no_bank: List[LayerScore] = []
    for layer_id, patterns in layers.items():
        try:
            per_layer[layer_id] = layer_distances(patterns)
        except EmptyInputError as e:
            logger.warning(str(e))
            no_bank.append(LayerScore(
                layer_id, None, len(patterns.rows(Role.TP)), len(patterns.rows(Role.FP))
            ))
    return sorted(rank_layers(per_layer) + no_bank, key=_sort_key)
