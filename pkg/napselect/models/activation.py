"""
Activation record model: a box's latent ReLU vector at one network layer.
"""

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from napselect.config import ACTIVATION_NEGATIVE_TOLERANCE
from napselect.exceptions import DataFormatError


class Role(enum.Enum):
    """
    Where a record is used: gt feeds the bank, tp/fp feed layer selection,
    det feeds frame scoring. Values are the NAPD binary role codes.
    """
    GT = 0
    TP = 1
    FP = 2
    DET = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value: str) -> 'Role':
        try:
            return next(role for role in cls if role.label == value)
        except StopIteration:
            raise DataFormatError(f"unknown role {value!r}") from None


@dataclass(frozen=True, eq=False)
class ActivationRecord:
    """
    Latent vector of one box at one layer, as exported by the detector.
    """
    frame_id: str
    box_id: str
    layer_id: str
    role: Role
    values: np.ndarray
    score: Optional[float] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size == 0:
            raise DataFormatError(f"record {self.key} needs a non-empty value vector")
        if not np.all(np.isfinite(values)):
            raise DataFormatError(f"record {self.key} has non-finite values")
        if values.min() < -ACTIVATION_NEGATIVE_TOLERANCE:
            raise DataFormatError(
                f"record {self.key} has negative activation {values.min()!r}; ReLU outputs expected"
            )
        values = np.maximum(values, 0.0)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    @property
    def key(self) -> tuple:
        return (self.frame_id, self.box_id, self.layer_id)

    def to_dict(self) -> dict:
        """Convert to the JSONL dump schema."""
        record = {
            "frame": self.frame_id,
            "box": self.box_id,
            "layer": self.layer_id,
            "role": self.role.label,
        }
        if self.score is not None:
            record["score"] = self.score
        record["values"] = [float(v) for v in self.values]
        return record
