"""
Generator for synthetic pipeline inputs: activation dumps, KITTI labels and
multi-beam point clouds.
"""

import json
import logging
import math
import os
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from faker import Faker

from napselect.config import BUNDLED_SIZE_STATS
from napselect.evaluation.geometry import camera_to_lidar_axes, from_box_local
from napselect.models import ActivationRecord, BoxLabel, PointCloud, Role
from napselect.utils.dump_handler import DumpHandler
from napselect.utils.kitti_handler import KittiHandler

PathLike = Union[str, Path]

# Layer whose patterns separate TP from FP, and one that does not
SEPARATING_LAYER = "roi.0"
NOISE_LAYER = "backbone.0"

# Elevation span of a 64-beam roof sensor, degrees
ELEVATION_RANGE = (-24.8, 2.0)
CAMERA_HEIGHT = 1.65


class FixtureGenerator:
    """
    Generates seeded synthetic data for the selection pipeline.
    """

    def __init__(self, seed: int = 0, logger: Optional[logging.Logger] = None):
        """
        Initialize the fixture generator.

        Args:
            seed: Seed for numpy and Faker; equal seeds give identical files
            logger: Logger instance (optional)
        """
        self.logger = logger or logging.getLogger(__name__)
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.fake = Faker()
        self.fake.seed_instance(seed)

    # Patterns and activation vectors

    def prototypes(self, n_clusters: int, dim: int) -> np.ndarray:
        """Random balanced bit patterns (exactly dim/2 bits set), one per cluster."""
        protos = np.zeros((n_clusters, dim), dtype=bool)
        for row in protos:
            row[self.rng.choice(dim, size=dim // 2, replace=False)] = True
        return protos

    def perturb(self, bits: np.ndarray, swaps: int) -> np.ndarray:
        """Swap ``swaps`` set bits with unset ones, keeping the popcount."""
        bits = bits.copy()
        on, off = np.flatnonzero(bits), np.flatnonzero(~bits)
        swaps = min(swaps, on.size, off.size)
        if swaps:
            bits[self.rng.choice(on, size=swaps, replace=False)] = False
            bits[self.rng.choice(off, size=swaps, replace=False)] = True
        return bits

    def activations(self, bits: np.ndarray) -> np.ndarray:
        """
        ReLU-like vector whose top-half pattern is ``bits`` (needs dim/2 bits set):
        set bits get values in [0.5, 1.5), the rest in [0, 0.1).
        """
        high = self.rng.uniform(0.5, 1.5, size=bits.size)
        low = self.rng.uniform(0.0, 0.1, size=bits.size)
        return np.round(np.where(bits, high, low), 6)

    def _box_id(self) -> str:
        return self.fake.unique.bothify("box-????-####")

    def generate_records(
        self,
        target_frames: Sequence[str],
        dim: int = 64,
        n_clusters: int = 3,
        gt_per_cluster: int = 8,
        n_tp: int = 20,
        n_fp: int = 20,
        boxes_per_frame: Tuple[int, int] = (2, 6),
    ) -> List[ActivationRecord]:
        """
        Activation records for two layers. Source gt/tp rows sit near cluster
        prototypes on the separating layer, fp rows are random; target frames
        each draw their detections from one cluster.
        """
        if dim % 2:
            raise ValueError("fixture dimension must be even")
        self.fake.unique.clear()
        protos = self.prototypes(n_clusters, dim)
        records: List[ActivationRecord] = []

        def add(frame_id: str, role: Role, layer_bits: Dict[str, np.ndarray], score: Optional[float] = None):
            box_id = self._box_id()
            for layer_id in (NOISE_LAYER, SEPARATING_LAYER):
                records.append(ActivationRecord(
                    frame_id=frame_id, box_id=box_id, layer_id=layer_id, role=role,
                    values=self.activations(layer_bits[layer_id]), score=score,
                ))

        def noise() -> np.ndarray:
            return self.prototypes(1, dim)[0]

        for c in range(n_clusters):
            for i in range(gt_per_cluster):
                add(f"src-{c:02d}{i:03d}", Role.GT, {
                    SEPARATING_LAYER: self.perturb(protos[c], int(self.rng.integers(0, 3))),
                    NOISE_LAYER: noise(),
                })
        for i in range(n_tp):
            c = int(self.rng.integers(n_clusters))
            add(f"src-tp{i:03d}", Role.TP, {SEPARATING_LAYER: self.perturb(protos[c], 1), NOISE_LAYER: noise()},
                score=round(float(self.rng.uniform(0.6, 1.0)), 4))
        for i in range(n_fp):
            add(f"src-fp{i:03d}", Role.FP, {SEPARATING_LAYER: noise(), NOISE_LAYER: noise()},
                score=round(float(self.rng.uniform(0.3, 0.9)), 4))

        for index, frame_id in enumerate(target_frames):
            cluster = index % n_clusters
            for _ in range(int(self.rng.integers(boxes_per_frame[0], boxes_per_frame[1] + 1))):
                add(frame_id, Role.DET, {
                    SEPARATING_LAYER: self.perturb(protos[cluster], int(self.rng.integers(0, 4))),
                    NOISE_LAYER: noise(),
                }, score=round(float(self.rng.uniform(0.3, 1.0)), 4))

        self.logger.info(f"Generated {len(records)} activation records for {len(target_frames)} target frames")
        return records

    # Labels

    def generate_labels(self, n_boxes: int, class_name: str = "Car") -> List[BoxLabel]:
        """Ground-truth boxes with dims jittered around the KITTI class mean."""
        mean_l, mean_w, mean_h = BUNDLED_SIZE_STATS["kitti"].get(class_name, (4.4, 1.79, 1.49))
        labels = []
        for _ in range(n_boxes):
            x = round(float(self.rng.uniform(-10.0, 10.0)), 2)
            z = round(float(self.rng.uniform(8.0, 40.0)), 2)
            ry = round(float(self.rng.uniform(-3.1, 3.1)), 2)
            alpha = round(math.atan2(math.sin(ry - math.atan2(x, z)), math.cos(ry - math.atan2(x, z))), 2)
            dims = tuple(round(float(v * self.rng.normal(1.0, 0.03)), 2) for v in (mean_h, mean_w, mean_l))
            left = round(float(self.rng.uniform(0.0, 1100.0)), 2)
            top = round(float(self.rng.uniform(150.0, 200.0)), 2)
            labels.append(BoxLabel(
                class_name=class_name,
                truncation=0.0,
                occlusion=int(self.rng.integers(0, 3)),
                alpha=alpha,
                bbox2d=(left, top, round(left + 40.0 + 800.0 / z, 2), round(top + 20.0 + 400.0 / z, 2)),
                dims=dims,
                location=(x, CAMERA_HEIGHT, z),
                rotation_y=ry,
            ))
        return labels

    def detections_for(self, labels: Sequence[BoxLabel], n_false: int = 1) -> List[BoxLabel]:
        """Jittered copies of the ground truth with scores, plus low-scoring false boxes."""
        detections = []
        for label in labels:
            x, y, z = label.location
            detections.append(BoxLabel(
                class_name=label.class_name, truncation=label.truncation, occlusion=label.occlusion,
                alpha=label.alpha, bbox2d=label.bbox2d, dims=label.dims,
                location=(round(x + float(self.rng.normal(0, 0.1)), 2), y, round(z + float(self.rng.normal(0, 0.1)), 2)),
                rotation_y=label.rotation_y,
                score=round(float(self.rng.uniform(0.6, 0.99)), 4),
            ))
        for false_box in self.generate_labels(n_false):
            detections.append(BoxLabel(
                class_name=false_box.class_name, truncation=0.0, occlusion=0, alpha=false_box.alpha,
                bbox2d=false_box.bbox2d, dims=false_box.dims, location=false_box.location,
                rotation_y=false_box.rotation_y, score=round(float(self.rng.uniform(0.05, 0.5)), 4),
            ))
        return detections

    # Point clouds

    def generate_point_cloud(
        self,
        n_beams: int = 64,
        n_azimuth: int = 512,
        labels: Sequence[BoxLabel] = (),
        points_per_box: int = 80,
    ) -> Tuple[PointCloud, np.ndarray]:
        """
        Uniform ring cloud in the LiDAR frame: ``n_azimuth`` points on each of
        ``n_beams`` equally spaced elevations, plus points inside each label box.

        Returns:
            (cloud, beam id per point)
        """
        elevations = np.radians(np.linspace(ELEVATION_RANGE[0], ELEVATION_RANGE[1], n_beams))
        azimuths = np.linspace(-math.pi, math.pi, n_azimuth, endpoint=False)
        el, az = np.meshgrid(elevations, azimuths, indexing="ij")
        radius = self.rng.uniform(5.0, 60.0, size=el.shape)
        xyz = np.stack([
            radius * np.cos(el) * np.cos(az),
            radius * np.cos(el) * np.sin(az),
            radius * np.sin(el),
        ], axis=-1).reshape(-1, 3)
        beam_ids = np.repeat(np.arange(n_beams), n_azimuth)

        parts, ids = [xyz], [beam_ids]
        step = (elevations[-1] - elevations[0]) / max(n_beams - 1, 1)
        for label in labels:
            box = label.to_box3d()
            local = np.column_stack([
                self.rng.uniform(-box.length / 2, box.length / 2, points_per_box),
                self.rng.uniform(-box.height, 0.0, points_per_box),
                self.rng.uniform(-box.width / 2, box.width / 2, points_per_box),
            ]) * 0.95
            lidar = camera_to_lidar_axes(from_box_local(local, box))
            elevation = np.arcsin(lidar[:, 2] / np.linalg.norm(lidar, axis=1))
            parts.append(lidar)
            ids.append(np.clip(np.rint((elevation - elevations[0]) / step), 0, n_beams - 1).astype(np.int64))

        xyz = np.vstack(parts)
        intensity = np.round(self.rng.uniform(0.0, 255.0, size=xyz.shape[0]))
        return PointCloud(np.column_stack([xyz, intensity])), np.concatenate(ids)

    # Workspace

    def generate_workspace(
        self,
        output_dir: PathLike,
        n_frames: int = 12,
        dim: int = 64,
        n_clusters: int = 3,
        n_beams: int = 64,
        n_azimuth: int = 256,
        binary_dump: bool = False,
    ) -> Dict[str, Path]:
        """
        Write a complete demo workspace.

        Args:
            output_dir: Directory to create
            n_frames: Number of target frames
            dim: Activation vector dimension (even)
            n_clusters: Number of target-domain pattern clusters
            n_beams: Beams of the synthetic sensor
            n_azimuth: Points per beam
            binary_dump: Write the dump as NAPD instead of JSONL

        Returns:
            Mapping of artifact name -> path
        """
        output_dir = Path(output_dir)
        paths = {
            "dump": output_dir / ("dump.napd" if binary_dump else "dump.jsonl"),
            "labels": output_dir / "label_2",
            "detections": output_dir / "detections",
            "clouds": output_dir / "velodyne",
            "beams": output_dir / "beams",
            "manifest": output_dir / "manifest.json",
        }
        for key in ("labels", "detections", "clouds", "beams"):
            os.makedirs(paths[key], exist_ok=True)

        frame_ids = [f"{index:06d}" for index in range(n_frames)]
        records = self.generate_records(frame_ids, dim=dim, n_clusters=n_clusters)
        DumpHandler.write_activation_dump(paths["dump"], records, binary=binary_dump)

        for frame_id in frame_ids:
            labels = self.generate_labels(int(self.rng.integers(1, 5)))
            KittiHandler.write_label_file(paths["labels"] / f"{frame_id}.txt", labels)
            KittiHandler.write_label_file(paths["detections"] / f"{frame_id}.txt", self.detections_for(labels))
            cloud, beam_ids = self.generate_point_cloud(n_beams, n_azimuth, labels)
            KittiHandler.write_point_cloud(paths["clouds"] / f"{frame_id}.bin", cloud)
            DumpHandler.write_beam_ids(paths["beams"] / f"{frame_id}.beam", beam_ids)

        manifest = {
            "seed": self.seed,
            "sensor": self.fake.bothify("LIDAR-??-###").upper(),
            "frames": frame_ids,
            "dim": dim,
            "clusters": n_clusters,
            "beams": n_beams,
            "layers": [NOISE_LAYER, SEPARATING_LAYER],
        }
        with open(paths["manifest"], "w", encoding="utf-8", newline="\n") as handle:
            json.dump(manifest, handle, indent=2)
            handle.write("\n")
        self.logger.info(f"Wrote fixture workspace with {n_frames} frames to {output_dir}")
        return paths
