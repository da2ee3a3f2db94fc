"""
KITTI-protocol 3D detection evaluation: rotated BEV/3D IoU, greedy matching,
interpolated average precision and the minimum-points ground-truth filter.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from napselect.config import DEFAULT_MIN_POINTS, R11_RECALL_POINTS, R40_RECALL_POINTS
from napselect.evaluation.geometry import bev_corners, clip_convex, points_in_box_mask, polygon_area
from napselect.exceptions import ConfigurationError, DataFormatError, EmptyInputError
from napselect.models import Box3D, BoxLabel, PointCloud

logger = logging.getLogger(__name__)

IoUFunction = Callable[[Box3D, Box3D], float]

INTERPOLATIONS = {"r40": R40_RECALL_POINTS, "r11": R11_RECALL_POINTS}


def _check_box(box: Box3D) -> None:
    if box.length * box.width <= 0 or box.height <= 0:
        raise DataFormatError(f"degenerate {box.class_name} box with dims {box.dims}")


def bev_intersection_area(a: Box3D, b: Box3D) -> float:
    """Area of overlap of the two yaw-rotated footprints in the x-z plane."""
    _check_box(a)
    _check_box(b)
    corners_a, corners_b = bev_corners(a), bev_corners(b)
    if np.array_equal(corners_a, corners_b):
        return a.length * a.width
    overlap = clip_convex(corners_a.tolist(), corners_b.tolist())
    return polygon_area(overlap)


def _vertical_overlap(a: Box3D, b: Box3D) -> float:
    top = max(a.location[1] - a.height, b.location[1] - b.height)
    bottom = min(a.location[1], b.location[1])
    return max(0.0, bottom - top)


def _ratio(intersection: float, union: float) -> float:
    if intersection <= 0.0:
        return 0.0
    return min(1.0, intersection / union)


def iou_bev(a: Box3D, b: Box3D) -> float:
    """Bird's-eye-view IoU of two rotated boxes."""
    inter = bev_intersection_area(a, b)
    return _ratio(inter, a.length * a.width + b.length * b.width - inter)


def iou_3d(a: Box3D, b: Box3D) -> float:
    """3D IoU: BEV overlap times vertical overlap over the union volume."""
    inter = bev_intersection_area(a, b) * _vertical_overlap(a, b)
    return _ratio(inter, a.volume + b.volume - inter)


IOU_FUNCTIONS: Dict[str, IoUFunction] = {"3d": iou_3d, "bev": iou_bev}


def points_in_box(cloud: PointCloud, box: Box3D) -> int:
    """Number of camera-frame points inside the box, faces inclusive."""
    if len(cloud) == 0:
        return 0
    return int(points_in_box_mask(cloud.xyz, box).sum())


def filter_gt_min_points(
    gts: Sequence[Box3D], cloud: PointCloud, min_points: int = DEFAULT_MIN_POINTS
) -> List[Box3D]:
    """Keep ground-truth boxes holding at least ``min_points`` points."""
    kept = [box for box in gts if points_in_box(cloud, box) >= min_points]
    if len(kept) < len(gts):
        logger.debug(f"Filtered {len(gts) - len(kept)} GT boxes with fewer than {min_points} points")
    return kept


@dataclass(frozen=True)
class FrameMatches:
    """
    Matching outcome of one frame: a TP flag per detection (in input order)
    and a matched flag per ground-truth box.
    """
    det_scores: Tuple[float, ...]
    det_is_tp: Tuple[bool, ...]
    gt_matched: Tuple[bool, ...]
    det_gt_index: Tuple[Optional[int], ...] = field(default_factory=tuple)

    @property
    def n_gt(self) -> int:
        return len(self.gt_matched)

    @property
    def n_det(self) -> int:
        return len(self.det_scores)

    @property
    def n_tp(self) -> int:
        return sum(self.det_is_tp)


def match_detections(
    dets: Sequence[Box3D],
    gts: Sequence[Box3D],
    iou_fn: IoUFunction,
    threshold: float,
) -> FrameMatches:
    """
    Greedy matching: detections in descending score (stable) each take the
    unmatched GT with the highest IoU when that IoU reaches ``threshold``.

    Raises:
        DataFormatError: If a detection has no score
    """
    for det in dets:
        if det.score is None:
            raise DataFormatError(f"{det.class_name} detection has no score")

    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    gt_matched = [False] * len(gts)
    det_is_tp = [False] * len(dets)
    det_gt: List[Optional[int]] = [None] * len(dets)
    for i in order:
        best_iou, best_gt = -1.0, None
        for j, gt in enumerate(gts):
            if gt_matched[j]:
                continue
            overlap = iou_fn(dets[i], gt)
            if overlap > best_iou:
                best_iou, best_gt = overlap, j
        if best_gt is not None and best_iou >= threshold:
            gt_matched[best_gt] = True
            det_is_tp[i] = True
            det_gt[i] = best_gt

    return FrameMatches(
        det_scores=tuple(float(d.score) for d in dets),
        det_is_tp=tuple(det_is_tp),
        gt_matched=tuple(gt_matched),
        det_gt_index=tuple(det_gt),
    )


@dataclass(frozen=True)
class APResult:
    """
    Average precision in [0, 100] with its precision/recall curve.
    """
    ap: float
    recall: Tuple[float, ...]
    precision: Tuple[float, ...]
    n_gt: int
    n_det: int
    n_tp: int
    interpolation: str = "r40"

    def to_dict(self) -> dict:
        return {"ap": self.ap, "n_gt": self.n_gt, "n_tp": self.n_tp}

    def pr_rows(self) -> List[Tuple[float, float]]:
        return list(zip(self.recall, self.precision))


def average_precision(matches: Sequence[FrameMatches], interpolation: str = "r40") -> APResult:
    """
    Interpolated AP over all frames: precision at each recall point is the
    maximum precision at recall >= that point.

    Args:
        matches: Per-frame matching outcomes
        interpolation: "r40" (recall 1/40 .. 1) or "r11" (recall 0, 0.1 .. 1)

    Raises:
        EmptyInputError: If there is no ground truth at all
    """
    if interpolation not in INTERPOLATIONS:
        raise ConfigurationError(f"unknown interpolation {interpolation!r}")
    n_gt = sum(m.n_gt for m in matches)
    if n_gt == 0:
        raise EmptyInputError("average precision needs at least one ground-truth box")

    scores = [s for m in matches for s in m.det_scores]
    flags = [t for m in matches for t in m.det_is_tp]
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    is_tp = np.array([flags[i] for i in order], dtype=bool)

    tp_cum = np.cumsum(is_tp)
    fp_cum = np.cumsum(~is_tp)
    recall = tp_cum / n_gt
    precision = tp_cum / np.maximum(tp_cum + fp_cum, 1)

    sampled = []
    for point in INTERPOLATIONS[interpolation]:
        reached = recall >= point
        sampled.append(float(precision[reached].max()) if reached.any() else 0.0)
    ap = 100.0 * sum(sampled) / len(sampled)

    return APResult(
        ap=ap,
        recall=tuple(float(r) for r in recall),
        precision=tuple(float(p) for p in precision),
        n_gt=n_gt,
        n_det=len(scores),
        n_tp=int(is_tp.sum()),
        interpolation=interpolation,
    )


@dataclass(frozen=True)
class EvalResult:
    """
    AP per (class, IoU threshold).
    """
    results: Mapping[Tuple[str, float], APResult]

    def to_dict(self) -> Dict[str, Dict[str, dict]]:
        out: Dict[str, Dict[str, dict]] = {}
        for (class_name, threshold), result in self.results.items():
            out.setdefault(class_name, {})[f"{threshold:g}"] = result.to_dict()
        return out

    def pr_rows(self) -> List[list]:
        """Rows of (class, iou, rank, recall, precision) for CSV export."""
        rows = []
        for (class_name, threshold), result in self.results.items():
            for rank, (r, p) in enumerate(result.pr_rows(), start=1):
                rows.append([class_name, f"{threshold:g}", rank, f"{r:.6f}", f"{p:.6f}"])
        return rows


PR_CURVE_HEADERS = ["class", "iou", "rank", "recall", "precision"]


def evaluate(
    gt_frames: Mapping[str, Sequence[BoxLabel]],
    det_frames: Mapping[str, Sequence[BoxLabel]],
    classes: Sequence[str],
    thresholds: Sequence[float],
    metric: str = "3d",
    interpolation: str = "r40",
    clouds: Optional[Mapping[str, PointCloud]] = None,
    min_points: Optional[int] = None,
) -> EvalResult:
    """
    Evaluate detections against ground truth over the GT frame set.

    Args:
        gt_frames: Ground-truth labels per frame id
        det_frames: Detection labels per frame id (missing frames have no detections)
        classes: Class names to evaluate
        thresholds: IoU thresholds
        metric: "3d" or "bev"
        interpolation: "r40" or "r11"
        clouds: Camera-frame clouds per frame id for the minimum-points filter
        min_points: Drop GT boxes with fewer points (requires ``clouds``)
    """
    if metric not in IOU_FUNCTIONS:
        raise ConfigurationError(f"unknown IoU metric {metric!r}")
    if min_points is not None and clouds is None:
        raise ConfigurationError("the minimum-points filter needs point clouds")
    iou_fn = IOU_FUNCTIONS[metric]

    extra = sorted(set(det_frames) - set(gt_frames))
    if extra:
        logger.warning(f"Ignoring detections for {len(extra)} frames without ground truth")

    results: Dict[Tuple[str, float], APResult] = {}
    for class_name in classes:
        per_frame: List[Tuple[List[Box3D], List[Box3D]]] = []
        for frame_id in sorted(gt_frames):
            gts = [label.to_box3d() for label in gt_frames[frame_id] if label.class_name == class_name]
            dets = [label.to_box3d() for label in det_frames.get(frame_id, ()) if label.class_name == class_name]
            if min_points is not None:
                if frame_id not in clouds:
                    raise DataFormatError(f"no point cloud for frame {frame_id}")
                gts = filter_gt_min_points(gts, clouds[frame_id], min_points)
            per_frame.append((dets, gts))

        for threshold in thresholds:
            matches = [match_detections(dets, gts, iou_fn, threshold) for dets, gts in per_frame]
            result = average_precision(matches, interpolation)
            results[(class_name, threshold)] = result
            logger.info(f"{class_name} AP_{metric}@{threshold:g} = {result.ap:.2f} ({result.n_tp}/{result.n_gt} matched)")
    return EvalResult(results=results)
