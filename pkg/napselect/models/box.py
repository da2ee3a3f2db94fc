"""
Box models in KITTI camera-frame convention (x right, y down, z forward).
"""

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

from napselect.exceptions import DataFormatError

DONT_CARE = "DontCare"

# Positional field names of a KITTI label line
LABEL_FIELDS = (
    "class_name", "truncation", "occlusion", "alpha",
    "bbox_left", "bbox_top", "bbox_right", "bbox_bottom",
    "height", "width", "length", "x", "y", "z", "rotation_y", "score",
)
GT_FIELD_COUNT = 15
DET_FIELD_COUNT = 16
# Detector result files write -1 for unknown truncation and occlusion
UNKNOWN = -1
VALID_OCCLUSION = (UNKNOWN, 0, 1, 2, 3)


@dataclass(frozen=True)
class Box3D:
    """
    Evaluation-side 3D box. ``location`` is the bottom-face center, so the
    vertical extent is [y - h, y]; at yaw 0 the length runs along camera x.
    """
    class_name: str
    dims: Tuple[float, float, float]  # (h, w, l)
    location: Tuple[float, float, float]  # (x, y, z)
    yaw: float
    score: Optional[float] = None

    def __post_init__(self):
        if min(self.dims) <= 0:
            raise DataFormatError(f"{self.class_name} box has non-positive dims {self.dims}")

    @property
    def height(self) -> float:
        return self.dims[0]

    @property
    def width(self) -> float:
        return self.dims[1]

    @property
    def length(self) -> float:
        return self.dims[2]

    @property
    def volume(self) -> float:
        return self.dims[0] * self.dims[1] * self.dims[2]


@dataclass(frozen=True)
class BoxLabel:
    """
    One line of a KITTI label file. Detections carry a trailing score.
    """
    class_name: str
    truncation: float
    occlusion: int
    alpha: float
    bbox2d: Tuple[float, float, float, float]  # (left, top, right, bottom)
    dims: Tuple[float, float, float]  # (h, w, l)
    location: Tuple[float, float, float]  # (x, y, z)
    rotation_y: float
    score: Optional[float] = None

    def __post_init__(self):
        if self.is_dont_care:
            return
        if min(self.dims) <= 0:
            raise DataFormatError(f"{self.class_name} label has non-positive dims {self.dims}")
        left, top, right, bottom = self.bbox2d
        if right < left or bottom < top:
            raise DataFormatError(f"{self.class_name} label has inverted 2D box {self.bbox2d}")
        if self.truncation != UNKNOWN and not 0.0 <= self.truncation <= 1.0:
            raise DataFormatError(f"{self.class_name} label truncation {self.truncation} outside [0, 1]")
        if self.occlusion not in VALID_OCCLUSION:
            raise DataFormatError(f"{self.class_name} label has invalid occlusion {self.occlusion}")
        if not -math.pi <= self.rotation_y <= math.pi:
            raise DataFormatError(f"{self.class_name} label rotation_y {self.rotation_y} outside [-pi, pi]")

    @property
    def is_dont_care(self) -> bool:
        return self.class_name == DONT_CARE

    @classmethod
    def from_line(cls, line: str) -> 'BoxLabel':
        """
        Create a BoxLabel from a KITTI label line.

        Args:
            line: 15 whitespace-separated fields (ground truth) or 16 (detection)

        Returns:
            BoxLabel instance

        Raises:
            DataFormatError: On a field-count mismatch or a non-numeric field
        """
        fields = line.split()
        if len(fields) not in (GT_FIELD_COUNT, DET_FIELD_COUNT):
            raise DataFormatError(
                f"expected {GT_FIELD_COUNT} or {DET_FIELD_COUNT} fields, got {len(fields)}"
            )

        values: List[float] = []
        for index in range(1, len(fields)):
            try:
                values.append(float(fields[index]))
            except ValueError:
                raise DataFormatError(
                    f"non-numeric {LABEL_FIELDS[index]} value {fields[index]!r}", field=index
                ) from None

        occlusion = values[1]
        if occlusion != int(occlusion):
            raise DataFormatError(f"occlusion must be an integer, got {fields[2]!r}", field=2)

        return cls(
            class_name=fields[0],
            truncation=values[0],
            occlusion=int(occlusion),
            alpha=values[2],
            bbox2d=(values[3], values[4], values[5], values[6]),
            dims=(values[7], values[8], values[9]),
            location=(values[10], values[11], values[12]),
            rotation_y=values[13],
            score=values[14] if len(values) == DET_FIELD_COUNT - 1 else None,
        )

    def to_line(self) -> str:
        """
        Convert the label to a KITTI label line (no line terminator).
        """
        numbers = [
            f"{self.truncation:.2f}",
            str(self.occlusion),
            f"{self.alpha:.2f}",
            *(f"{v:.2f}" for v in self.bbox2d),
            *(f"{v:.2f}" for v in self.dims),
            *(f"{v:.2f}" for v in self.location),
            f"{self.rotation_y:.2f}",
        ]
        if self.score is not None:
            numbers.append(f"{self.score:.4f}")
        return " ".join([self.class_name, *numbers])

    def with_dims(self, dims: Tuple[float, float, float]) -> 'BoxLabel':
        """Return a copy with new (h, w, l) dims and everything else unchanged."""
        return replace(self, dims=dims)

    def to_box3d(self) -> Box3D:
        """Convert to the evaluation-side representation."""
        return Box3D(
            class_name=self.class_name,
            dims=self.dims,
            location=self.location,
            yaw=self.rotation_y,
            score=self.score,
        )
