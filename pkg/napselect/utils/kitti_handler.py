"""
KITTI file handling: label files, point-cloud binaries and size statistics.
"""

import json
import logging
import os
from collections import OrderedDict
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np

from napselect.config import BUNDLED_SIZE_STATS, DEFAULT_INTENSITY_DIVISOR, POINT_RECORD_BYTES
from napselect.exceptions import ConfigurationError, DataFormatError
from napselect.models import BoxLabel, PointCloud, SizeStats

logger = logging.getLogger(__name__)

INTENSITY_MODES = ("divisor", "minmax")
LABEL_SUFFIX = ".txt"
CLOUD_SUFFIX = ".bin"


class KittiHandler:
    """
    Reads and writes KITTI-format artifacts.
    """

    @staticmethod
    def parse_label_line(line: str) -> BoxLabel:
        """
        Parse one label line (15 fields for ground truth, 16 for detections).

        Raises:
            DataFormatError: On a field-count mismatch or a non-numeric field
        """
        return BoxLabel.from_line(line)

    @staticmethod
    def format_label_line(label: BoxLabel) -> str:
        return label.to_line()

    @staticmethod
    def read_label_file(file_path: Union[str, Path]) -> List[BoxLabel]:
        """
        Read a label file; blank lines are skipped.

        Args:
            file_path: Path to a KITTI label file

        Returns:
            Labels in file order

        Raises:
            FileNotFoundError: If the file doesn't exist
            DataFormatError: With file and line context on a malformed line
        """
        if not os.path.exists(file_path):
            raise FileNotFoundError(f"File not found: {file_path}")

        labels = []
        with open(file_path, "r") as handle:
            for line_number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    labels.append(BoxLabel.from_line(line))
                except DataFormatError as error:
                    raise error.with_context(source=file_path, line=line_number) from None
        return labels

    @staticmethod
    def write_label_file(file_path: Union[str, Path], labels: Sequence[BoxLabel]) -> None:
        os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
        with open(file_path, "w", newline="\n") as handle:
            for label in labels:
                handle.write(label.to_line() + "\n")

    @staticmethod
    def read_label_dir(directory: Union[str, Path]) -> Dict[str, List[BoxLabel]]:
        """
        Read every ``*.txt`` label file of a directory.

        Returns:
            Mapping frame id (file stem) -> labels, frames in identifier order
        """
        directory = Path(directory)
        if not directory.is_dir():
            raise FileNotFoundError(f"Label directory not found: {directory}")
        frames = OrderedDict()
        for path in sorted(directory.glob(f"*{LABEL_SUFFIX}")):
            frames[path.stem] = KittiHandler.read_label_file(path)
        logger.info(f"Read {len(frames)} label files from {directory}")
        return frames

    @staticmethod
    def read_point_cloud(data: bytes) -> PointCloud:
        """
        Decode consecutive little-endian float32 (x, y, z, intensity) records.

        Raises:
            DataFormatError: If the length is not a multiple of 16 bytes or a
                value is not finite
        """
        if len(data) % POINT_RECORD_BYTES:
            raise DataFormatError(
                f"point cloud length {len(data)} is not a multiple of {POINT_RECORD_BYTES} bytes"
            )
        points = np.frombuffer(data, dtype="<f4").reshape(-1, 4)
        bad = np.flatnonzero(~np.isfinite(points).all(axis=1))
        if bad.size:
            shown = ", ".join(str(i) for i in bad[:20])
            more = f" (+{bad.size - 20} more)" if bad.size > 20 else ""
            raise DataFormatError(f"non-finite values at point indices {shown}{more}")
        return PointCloud(points)

    @staticmethod
    def write_point_cloud(file_path: Union[str, Path], cloud: PointCloud) -> None:
        os.makedirs(os.path.dirname(os.path.abspath(file_path)), exist_ok=True)
        with open(file_path, "wb") as handle:
            handle.write(cloud.to_bytes())

    @staticmethod
    def read_cloud_file(file_path: Union[str, Path]) -> PointCloud:
        with open(file_path, "rb") as handle:
            data = handle.read()
        try:
            return KittiHandler.read_point_cloud(data)
        except DataFormatError as error:
            raise error.with_context(source=file_path) from None

    @staticmethod
    def read_cloud_dir(directory: Union[str, Path]) -> Dict[str, PointCloud]:
        """Mapping frame id -> cloud for every ``*.bin`` file, frames in identifier order."""
        directory = Path(directory)
        if not directory.is_dir():
            raise FileNotFoundError(f"Point cloud directory not found: {directory}")
        clouds = OrderedDict()
        for path in sorted(directory.glob(f"*{CLOUD_SUFFIX}")):
            clouds[path.stem] = KittiHandler.read_cloud_file(path)
        logger.info(f"Read {len(clouds)} point clouds from {directory}")
        return clouds

    @staticmethod
    def normalize_intensity(
        cloud: PointCloud, mode: str = "divisor", divisor: float = DEFAULT_INTENSITY_DIVISOR
    ) -> PointCloud:
        """
        Map intensities into [0, 1].

        Args:
            cloud: Input cloud
            mode: "divisor" clamps intensity / divisor to [0, 1]; "minmax" maps the
                cloud's own [min, max] onto [0, 1] (all zeros when max == min)
            divisor: Positive divisor for "divisor" mode

        Returns:
            New cloud with the same coordinates

        Raises:
            ConfigurationError: On an unknown mode or a non-positive divisor
        """
        if mode not in INTENSITY_MODES:
            raise ConfigurationError(f"unknown intensity mode {mode!r}")
        if mode == "divisor" and not divisor > 0:
            raise ConfigurationError(f"intensity divisor must be positive, got {divisor}")
        if len(cloud) == 0:
            return cloud

        intensity = cloud.intensity.astype(np.float64)
        if mode == "divisor":
            scaled = np.clip(intensity / divisor, 0.0, 1.0)
        else:
            low, high = intensity.min(), intensity.max()
            if high == low:
                scaled = np.zeros_like(intensity)
            else:
                scaled = np.clip((intensity - low) / (high - low), 0.0, 1.0)
        return cloud.with_intensity(scaled)

    @staticmethod
    def read_size_stats(file_path: Union[str, Path]) -> SizeStats:
        """
        Read a size-statistics JSON file {"<class>": {"l": .., "w": .., "h": ..}}.
        """
        try:
            with open(file_path, "r") as handle:
                data = json.load(handle)
        except json.JSONDecodeError as error:
            raise DataFormatError(f"invalid JSON: {error.msg}", source=file_path, line=error.lineno) from None
        return SizeStats.from_dict(data, name=str(file_path))

    @staticmethod
    def load_size_stats(name_or_path: Union[str, Path]) -> SizeStats:
        """
        Resolve a bundled table name (kitti, nuscenes, waymo; any case) or a JSON path.
        """
        key = str(name_or_path).lower()
        if key in BUNDLED_SIZE_STATS:
            return SizeStats(means=dict(BUNDLED_SIZE_STATS[key]), name=key)
        if not os.path.exists(name_or_path):
            raise FileNotFoundError(
                f"Size stats {name_or_path!r} is neither a bundled table "
                f"({', '.join(sorted(BUNDLED_SIZE_STATS))}) nor an existing file"
            )
        return KittiHandler.read_size_stats(name_or_path)
