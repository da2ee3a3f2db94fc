"""
Point cloud model for KITTI-format LiDAR sweeps.
"""

from dataclasses import dataclass

import numpy as np

from napselect.exceptions import DataFormatError


@dataclass(frozen=True, eq=False)
class PointCloud:
    """
    LiDAR sweep stored as an (n, 4) little-endian float32 array of
    (x, y, z, intensity).
    """
    points: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype="<f4")
        if points.ndim != 2 or points.shape[1] != 4:
            raise DataFormatError(f"point array must have shape (n, 4), got {points.shape}")
        points = np.ascontiguousarray(points)
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def xyz(self) -> np.ndarray:
        return self.points[:, :3]

    @property
    def intensity(self) -> np.ndarray:
        return self.points[:, 3]

    @classmethod
    def empty(cls) -> 'PointCloud':
        return cls(np.zeros((0, 4), dtype="<f4"))

    def with_xyz(self, xyz: np.ndarray) -> 'PointCloud':
        """Return a copy with replaced coordinates and the same intensities."""
        return PointCloud(np.column_stack([np.asarray(xyz, dtype="<f4"), self.intensity]))

    def with_intensity(self, intensity: np.ndarray) -> 'PointCloud':
        """Return a copy with replaced intensities and the same coordinates."""
        return PointCloud(np.column_stack([self.xyz, np.asarray(intensity, dtype="<f4")]))

    def subset(self, mask: np.ndarray) -> 'PointCloud':
        """Return the points selected by a boolean mask, order preserved."""
        return PointCloud(self.points[mask])

    def to_bytes(self) -> bytes:
        return self.points.astype("<f4", copy=False).tobytes()
