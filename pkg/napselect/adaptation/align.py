"""
Source-to-target distribution alignment: Stat-Norm box resizing (with
optional point rescaling) and beam-based point-cloud downsampling.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from napselect.evaluation.geometry import (
    camera_to_lidar_axes, from_box_local, lidar_to_camera_axes, points_in_box_mask, to_box_local,
)
from napselect.exceptions import ConfigurationError, DataFormatError, EmptyInputError
from napselect.models import Box3D, BoxLabel, PointCloud, SizeStats

logger = logging.getLogger(__name__)

STATNORM_MODES = ("additive", "multiplicative")

Triple = Tuple[float, float, float]


@dataclass(frozen=True)
class SizeDelta:
    """
    Per-class (l, w, h) shift (target mean - source mean) and ratio
    (target mean / source mean).
    """
    shifts: Dict[str, Triple]
    ratios: Dict[str, Triple]

    def classes(self) -> List[str]:
        return sorted(self.shifts)


def compute_size_delta(source: SizeStats, target: SizeStats) -> SizeDelta:
    """
    Componentwise target - source mean dims for the classes both stats share.

    Raises:
        EmptyInputError: If the stats share no class
    """
    shared = sorted(source.classes() & target.classes())
    if not shared:
        raise EmptyInputError("source and target size stats share no class")
    missing = sorted(source.classes() ^ target.classes())
    if missing:
        logger.warning(f"Classes present in only one size-stats table are left unchanged: {', '.join(missing)}")

    shifts, ratios = {}, {}
    for class_name in shared:
        src, tgt = source.means[class_name], target.means[class_name]
        shifts[class_name] = tuple(t - s for s, t in zip(src, tgt))
        ratios[class_name] = tuple(t / s for s, t in zip(src, tgt))
    return SizeDelta(shifts=shifts, ratios=ratios)


def _adjust_dims(label: BoxLabel, delta: SizeDelta, mode: str) -> Triple:
    h, w, l = label.dims
    if mode == "additive":
        dl, dw, dh = delta.shifts[label.class_name]
        return (h + dh, w + dw, l + dl)
    rl, rw, rh = delta.ratios[label.class_name]
    return (h * rh, w * rw, l * rl)


def statnorm_labels(
    labels: Sequence[BoxLabel], delta: SizeDelta, mode: str = "additive"
) -> List[BoxLabel]:
    """
    Resize boxes of covered classes; other classes pass through untouched.

    The bottom-face center (KITTI location) and yaw are kept, so a box grows
    upward from the ground and around its footprint center.

    Raises:
        DataFormatError: If an adjusted dimension is not positive
    """
    if mode not in STATNORM_MODES:
        raise ConfigurationError(f"unknown Stat-Norm mode {mode!r}")
    adjusted = []
    for index, label in enumerate(labels):
        if label.class_name not in delta.shifts:
            adjusted.append(label)
            continue
        dims = _adjust_dims(label, delta, mode)
        if min(dims) <= 0:
            raise DataFormatError(
                f"box {index} ({label.class_name}) would get non-positive dims (h, w, l) = {dims}"
            )
        adjusted.append(label.with_dims(dims))
    return adjusted


def statnorm_points(cloud: PointCloud, original: Box3D, adjusted: Box3D) -> PointCloud:
    """
    Rescale the points inside ``original`` so they fill ``adjusted``.

    Points are scaled in box-local coordinates by (l'/l, h'/h, w'/w) about the
    footprint center and the bottom face; points outside are untouched.
    """
    if min(original.dims) <= 0:
        raise DataFormatError(f"degenerate original box dims {original.dims}")
    if (original.location[0], original.location[2], original.yaw) != (
        adjusted.location[0], adjusted.location[2], adjusted.yaw
    ):
        raise ConfigurationError("original and adjusted boxes must share footprint center and yaw")
    if len(cloud) == 0:
        return cloud

    xyz = cloud.xyz.astype(np.float64)
    mask = points_in_box_mask(xyz, original)
    if not mask.any():
        return cloud
    scale = np.array([
        adjusted.length / original.length,
        adjusted.height / original.height,
        adjusted.width / original.width,
    ])
    local = to_box_local(xyz[mask], original) * scale
    xyz[mask] = from_box_local(local, adjusted)
    return cloud.with_xyz(xyz)


def statnorm_frame(
    labels: Sequence[BoxLabel],
    cloud: PointCloud,
    delta: SizeDelta,
    mode: str = "additive",
    cloud_in_lidar_frame: bool = True,
) -> Tuple[List[BoxLabel], PointCloud]:
    """Resize a frame's labels and rescale the points inside each resized box."""
    adjusted = statnorm_labels(labels, delta, mode)
    camera = cloud.with_xyz(lidar_to_camera_axes(cloud.xyz)) if cloud_in_lidar_frame else cloud
    for before, after in zip(labels, adjusted):
        if after is not before:
            camera = statnorm_points(camera, before.to_box3d(), after.to_box3d())
    if cloud_in_lidar_frame:
        return adjusted, camera.with_xyz(camera_to_lidar_axes(camera.xyz))
    return adjusted, camera


@dataclass(frozen=True)
class BeamModel:
    """
    Uniform elevation bins over [min_elev, max_elev]; the top edge belongs to the last beam.
    """
    n_beams: int
    edges: np.ndarray

    def __post_init__(self):
        if self.n_beams < 2:
            raise ConfigurationError(f"a beam model needs at least 2 beams, got {self.n_beams}")
        edges = np.asarray(self.edges, dtype=np.float64)
        if edges.shape != (self.n_beams + 1,) or not np.all(np.diff(edges) > 0):
            raise ConfigurationError("beam edges must be n_beams + 1 strictly increasing angles")
        object.__setattr__(self, "edges", edges)

    def assign(self, elevation: np.ndarray) -> np.ndarray:
        low, high = self.edges[0], self.edges[-1]
        ids = np.floor((elevation - low) / (high - low) * self.n_beams).astype(np.int64)
        return np.clip(ids, 0, self.n_beams - 1)


def elevation_angles(cloud: PointCloud) -> np.ndarray:
    """arcsin(z / r) per point (LiDAR frame, z up)."""
    xyz = cloud.xyz.astype(np.float64)
    radius = np.linalg.norm(xyz, axis=1)
    zero = np.flatnonzero(radius == 0)
    if zero.size:
        raise DataFormatError(f"points at the sensor origin have no elevation: indices {zero[:10].tolist()}")
    return np.arcsin(np.clip(xyz[:, 2] / radius, -1.0, 1.0))


def estimate_beams(cloud: PointCloud, n_beams: int) -> np.ndarray:
    """
    Beam id per point by uniform binning of elevation between the observed
    minimum and maximum. Approximates ring indices that KITTI-format files lack.
    """
    if n_beams < 2:
        raise ConfigurationError(f"n_beams must be >= 2, got {n_beams}")
    if len(cloud) == 0:
        raise EmptyInputError("cannot estimate beams of an empty cloud")
    elevation = elevation_angles(cloud)
    if elevation.max() == elevation.min():
        return np.zeros(elevation.shape[0], dtype=np.int64)
    model = BeamModel(
        n_beams=n_beams,
        edges=np.linspace(elevation.min(), elevation.max(), n_beams + 1),
    )
    return model.assign(elevation)


def _nearest_supported(source_beams: int, target_beams: int) -> int:
    divisors = [d for d in range(1, source_beams + 1) if source_beams % d == 0]
    return min(divisors, key=lambda d: (abs(d - target_beams), d))


def downsample_beams(
    cloud: PointCloud,
    beam_ids: np.ndarray,
    source_beams: int,
    target_beams: int,
) -> PointCloud:
    """
    Keep every (source/target)-th beam: points whose id is 0 mod the ratio.

    Raises:
        ConfigurationError: If target_beams does not divide source_beams
    """
    if target_beams < 1 or source_beams < 1:
        raise ConfigurationError("beam counts must be positive")
    if source_beams % target_beams:
        raise ConfigurationError(
            f"{source_beams} beams cannot be reduced to {target_beams}; "
            f"nearest supported target is {_nearest_supported(source_beams, target_beams)}"
        )
    beam_ids = np.asarray(beam_ids).reshape(-1)
    if beam_ids.shape[0] != len(cloud):
        raise DataFormatError(f"{beam_ids.shape[0]} beam ids for {len(cloud)} points")
    ratio = source_beams // target_beams
    return cloud.subset(beam_ids % ratio == 0)
