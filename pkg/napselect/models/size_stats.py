"""
Per-class mean bounding-box size statistics.
"""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

from napselect.exceptions import DataFormatError


@dataclass(frozen=True)
class SizeStats:
    """
    Mean (l, w, h) in meters per class name.
    """
    means: Mapping[str, Tuple[float, float, float]] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        for class_name, dims in self.means.items():
            if len(dims) != 3 or min(dims) <= 0:
                raise DataFormatError(f"{class_name} size stats must be three positive values, got {dims}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Mapping[str, float]], name: str = "") -> 'SizeStats':
        """
        Create SizeStats from the JSON schema {"<class>": {"l": .., "w": .., "h": ..}}.
        """
        if not isinstance(data, Mapping):
            raise DataFormatError("size stats must be a JSON object", source=name or None)
        means: Dict[str, Tuple[float, float, float]] = {}
        for class_name, entry in data.items():
            try:
                means[class_name] = (float(entry["l"]), float(entry["w"]), float(entry["h"]))
            except (KeyError, TypeError, ValueError):
                raise DataFormatError(
                    f"{class_name} entry needs numeric l, w, h", source=name or None
                ) from None
        return cls(means=means, name=name)

    def to_dict(self) -> Dict[str, Dict[str, float]]:
        return {c: {"l": l, "w": w, "h": h} for c, (l, w, h) in self.means.items()}

    def classes(self) -> set:
        return set(self.means)
