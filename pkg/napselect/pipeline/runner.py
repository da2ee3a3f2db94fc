"""
Stage orchestration for the selection pipeline and its companion tools.

Stages communicate through files: the pattern cache, the bank file and JSON
score/selection documents, so selection can be re-run with a different K or N
without re-reading activation dumps.
"""

import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from napselect.adaptation import (
    L2SPConfig, compute_size_delta, const_schedule, downsample_beams, estimate_beams, l2sp_gradient, l2sp_penalty,
    linear_fade, schedule_rows, statnorm_frame, statnorm_labels,
)
from napselect.config import DEFAULT_CONST_LR, DEFAULT_FADE_LR, DEFAULT_INTENSITY_DIVISOR, DEFAULT_L2SP_ALPHA
from napselect.evaluation import PR_CURVE_HEADERS, evaluate, lidar_to_camera_axes
from napselect.exceptions import ConfigurationError, EmptyInputError
from napselect.models import Role
from napselect.selection import (
    LayerPatterns, LayerScore, PatternBank, SelectionConfig, SelectionResult, FrameRecord,
    build_frame_records, extract_layer_patterns, random_frames, rank_pattern_layers, select_frames,
)
from napselect.utils.csv_handler import CSVHandler
from napselect.utils.dump_handler import DumpHandler
from napselect.utils.kitti_handler import KittiHandler

PathLike = Union[str, Path]

CLOUD_FRAMES = ("lidar", "camera")
STRATEGIES = ("diverse", "random")
SCHEDULE_KINDS = "fade", "const", "l2sp-check"
SCHEDULE_HEADERS = ("epoch", "lr")
BEAM_SUFFIX = ".beam"


@dataclass
class PipelineConfig:
    """
    Inputs shared by the selection stages: exactly one of ``dump`` or
    ``patterns`` names the activation source.
    """
    dump: Optional[Path] = None
    patterns: Optional[Path] = None
    layer: Optional[str] = None
    bank: Optional[Path] = None
    selection: SelectionConfig = field(default_factory=SelectionConfig)

    def __post_init__(self):
        if (self.dump is None) == (self.patterns is None):
            raise ConfigurationError("give exactly one of an activation dump or a pattern cache")
        for path in (self.dump, self.patterns, self.bank):
            if path is not None and not Path(path).exists():
                raise FileNotFoundError(f"Input not found: {path}")


def dump_json(document: object) -> str:
    """Deterministic JSON text for machine output."""
    return json.dumps(document, indent=2, allow_nan=False) + "\n"


class PipelineRunner:
    """
    Runs the pipeline stages, reading and writing their artifacts.
    """

    def __init__(self, logger: Optional[logging.Logger] = None):
        """
        Initialize the runner.

        Args:
            logger: Logger instance (optional)
        """
        self.logger = logger or logging.getLogger(__name__)
        self.kitti = KittiHandler()
        self.dumps = DumpHandler()
        self.csv_handler = CSVHandler()

    def emit(self, text: str, output: Optional[PathLike]) -> None:
        """Write machine output to a file, or standard output when no path is given."""
        if output is None:
            sys.stdout.write(text)
            sys.stdout.flush()
            return
        os.makedirs(os.path.dirname(os.path.abspath(output)), exist_ok=True)
        with open(output, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        self.logger.info(f"Wrote {output}")

    # Selection stages

    def load_layers(self, cfg: PipelineConfig) -> Dict[str, LayerPatterns]:
        if cfg.dump is not None:
            return extract_layer_patterns(self.dumps.read_activation_dump(cfg.dump))
        return self.dumps.read_pattern_cache(cfg.patterns)

    def resolve_layer(self, layers: Dict[str, LayerPatterns], layer: Optional[str]) -> LayerPatterns:
        """
        The requested layer, the only layer, or the top AUROC layer otherwise.
        """
        if not layers:
            raise EmptyInputError("the activation source holds no layers")
        if layer is not None:
            if layer not in layers:
                raise ConfigurationError(f"unknown layer {layer!r}; available: {', '.join(layers)}")
            return layers[layer]
        if len(layers) == 1:
            return next(iter(layers.values()))
        best = rank_pattern_layers(layers)[0]
        if not best.defined:
            raise ConfigurationError("no layer has a defined AUROC; pass a layer explicitly")
        self.logger.info(f"Using top-ranked layer {best.layer_id} (AUROC {best.auroc:.4f})")
        return layers[best.layer_id]

    def resolve_bank(self, cfg: PipelineConfig, patterns: LayerPatterns) -> PatternBank:
        if cfg.bank is not None:
            bank = self.dumps.read_bank(cfg.bank)
            if bank.dim != patterns.dim:
                raise ConfigurationError(
                    f"bank {cfg.bank} holds {bank.dim}-bit patterns, layer {patterns.layer_id} has {patterns.dim}"
                )
            return bank
        return self.build_bank(patterns)

    def build_bank(self, patterns: LayerPatterns) -> PatternBank:
        gt_words = patterns.role_words(Role.GT)
        if gt_words.shape[0] == 0:
            raise EmptyInputError(f"layer {patterns.layer_id} has no ground-truth patterns for a bank")
        self.logger.info(f"Built bank of {gt_words.shape[0]} patterns from layer {patterns.layer_id}")
        return PatternBank.from_words(gt_words, patterns.dim)

    def extract(self, dump: PathLike, out_dir: PathLike) -> Dict[str, LayerPatterns]:
        """Dump -> pattern cache."""
        layers = extract_layer_patterns(self.dumps.read_activation_dump(dump))
        self.dumps.write_pattern_cache(out_dir, layers)
        return layers

    def bank(self, cfg: PipelineConfig, out: PathLike) -> PatternBank:
        """GT patterns of one layer -> bank file."""
        patterns = self.resolve_layer(self.load_layers(cfg), cfg.layer)
        bank = self.build_bank(patterns)
        self.dumps.write_bank(out, bank)
        return bank

    def layers(self, cfg: PipelineConfig, out: Optional[PathLike] = None) -> List[LayerScore]:
        """TP/FP distances -> ranked AUROC document."""
        scores = rank_pattern_layers(self.load_layers(cfg))
        document = {
            "selected": scores[0].layer_id if scores and scores[0].defined else None,
            "layers": [score.to_dict() for score in scores],
        }
        self.emit(dump_json(document), out)
        return scores

    def frame_records(self, cfg: PipelineConfig) -> Tuple[str, List[FrameRecord]]:
        patterns = self.resolve_layer(self.load_layers(cfg), cfg.layer)
        bank = self.resolve_bank(cfg, patterns)
        records = build_frame_records(patterns, bank, cfg.selection.score_threshold)
        return patterns.layer_id, records

    def score(self, cfg: PipelineConfig, out: Optional[PathLike] = None) -> List[FrameRecord]:
        """Detection patterns + bank -> per-frame entropy document."""
        layer_id, records = self.frame_records(cfg)
        document = {
            "layer": layer_id,
            "frames": [
                {"frame": r.frame_id, "n_boxes": r.n_boxes, "H": r.entropy, "distances": list(r.distances)}
                for r in records
            ],
        }
        self.emit(dump_json(document), out)
        return records

    def select(
        self,
        cfg: PipelineConfig,
        out: Optional[PathLike] = None,
        frame_list: Optional[PathLike] = None,
        strategy: str = "diverse",
        seed: int = 0,
    ) -> SelectionResult:
        """Frame records -> selection document plus a plain-text frame list."""
        if strategy not in STRATEGIES:
            raise ConfigurationError(f"unknown selection strategy {strategy!r}")
        layer_id, records = self.frame_records(cfg)
        if strategy == "diverse":
            result = select_frames(records, cfg.selection)
        else:
            result = random_frames(records, cfg.selection, seed=seed)

        document = result.to_dict()
        document["layer"] = layer_id
        self.emit(dump_json(document), out)
        if frame_list is not None:
            self.emit("".join(f"{frame_id}\n" for frame_id in result.frame_ids), frame_list)
        self.logger.info(f"Selected frames: {', '.join(result.frame_ids)}")
        return result

    # Alignment and evaluation tools

    def statnorm(
        self,
        labels_dir: PathLike,
        out_dir: PathLike,
        source: str,
        target: str,
        mode: str = "additive",
        clouds_dir: Optional[PathLike] = None,
        clouds_out: Optional[PathLike] = None,
        cloud_frame: str = "lidar",
    ) -> int:
        """
        Resize every label file's boxes to the target statistics; with clouds,
        rescale the points inside each resized box as well.

        Returns:
            Number of frames written
        """
        if (clouds_dir is None) != (clouds_out is None):
            raise ConfigurationError("point rescaling needs both an input and an output cloud directory")
        _check_cloud_frame(cloud_frame)
        delta = compute_size_delta(self.kitti.load_size_stats(source), self.kitti.load_size_stats(target))
        for class_name in delta.classes():
            dl, dw, dh = delta.shifts[class_name]
            self.logger.info(f"{class_name} size delta (l, w, h) = ({dl:.4f}, {dw:.4f}, {dh:.4f})")

        frames = self.kitti.read_label_dir(labels_dir)
        clouds = self.kitti.read_cloud_dir(clouds_dir) if clouds_dir is not None else {}
        for frame_id, labels in frames.items():
            if clouds_dir is not None and frame_id in clouds:
                adjusted, cloud = statnorm_frame(labels, clouds[frame_id], delta, mode, cloud_frame == "lidar")
                self.kitti.write_point_cloud(Path(clouds_out) / f"{frame_id}.bin", cloud)
            else:
                if clouds_dir is not None:
                    self.logger.warning(f"No point cloud for frame {frame_id}; labels only")
                adjusted = statnorm_labels(labels, delta, mode)
            self.kitti.write_label_file(Path(out_dir) / f"{frame_id}.txt", adjusted)
        self.logger.info(f"Stat-Norm ({mode}) applied to {len(frames)} frames")
        return len(frames)

    def downsample(
        self,
        clouds_dir: PathLike,
        out_dir: PathLike,
        source_beams: int,
        target_beams: int,
        beams_dir: Optional[PathLike] = None,
    ) -> int:
        """
        Keep every (source/target)-th beam of each cloud. Beam ids come from a
        ``<frame>.beam`` sidecar when present, otherwise from elevation binning.
        """
        clouds = self.kitti.read_cloud_dir(clouds_dir)
        kept = total = 0
        for frame_id, cloud in clouds.items():
            sidecar = Path(beams_dir) / f"{frame_id}{BEAM_SUFFIX}" if beams_dir is not None else None
            if sidecar is not None and sidecar.exists():
                beam_ids = self.dumps.read_beam_ids(sidecar)
            else:
                beam_ids = estimate_beams(cloud, source_beams)
            reduced = downsample_beams(cloud, beam_ids, source_beams, target_beams)
            self.kitti.write_point_cloud(Path(out_dir) / f"{frame_id}.bin", reduced)
            kept += len(reduced)
            total += len(cloud)
        self.logger.info(f"Downsampled {len(clouds)} clouds {source_beams}->{target_beams} beams, kept {kept}/{total} points")
        return len(clouds)

    def normalize(
        self,
        clouds_dir: PathLike,
        out_dir: PathLike,
        mode: str = "divisor",
        divisor: float = DEFAULT_INTENSITY_DIVISOR,
    ) -> int:
        clouds = self.kitti.read_cloud_dir(clouds_dir)
        for frame_id, cloud in clouds.items():
            normalized = self.kitti.normalize_intensity(cloud, mode=mode, divisor=divisor)
            self.kitti.write_point_cloud(Path(out_dir) / f"{frame_id}.bin", normalized)
        self.logger.info(f"Normalized intensity of {len(clouds)} clouds ({mode})")
        return len(clouds)

    def evaluate(
        self,
        gt_dir: PathLike,
        det_dir: PathLike,
        classes: Sequence[str],
        thresholds: Sequence[float],
        metric: str = "3d",
        interpolation: str = "r40",
        clouds_dir: Optional[PathLike] = None,
        min_points: Optional[int] = None,
        cloud_frame: str = "lidar",
        out: Optional[PathLike] = None,
        pr_csv: Optional[PathLike] = None,
    ):
        """KITTI-protocol AP per class and IoU threshold."""
        _check_cloud_frame(cloud_frame)
        gt_frames = self.kitti.read_label_dir(gt_dir)
        det_frames = self.kitti.read_label_dir(det_dir)
        clouds = None
        if clouds_dir is not None:
            clouds = self.kitti.read_cloud_dir(clouds_dir)
            if cloud_frame == "lidar":
                clouds = {k: c.with_xyz(lidar_to_camera_axes(c.xyz)) for k, c in clouds.items()}
        elif min_points is not None:
            raise ConfigurationError("--min-points needs --clouds")

        result = evaluate(gt_frames, det_frames, classes, thresholds, metric, interpolation, clouds, min_points)
        self.emit(dump_json(result.to_dict()), out)
        if pr_csv is not None:
            self.csv_handler.write_table(pr_csv, PR_CURVE_HEADERS, result.pr_rows())
        return result

    def l2sp_check(self, weights: PathLike, reference: PathLike, alpha: float = DEFAULT_L2SP_ALPHA) -> dict:
        """Penalty and gradient norm of a weight file against its pre-trained reference."""
        cfg = L2SPConfig(alpha=alpha)
        w, w0 = self.dumps.read_weights(weights), self.dumps.read_weights(reference)
        penalty = l2sp_penalty(w, w0, cfg)
        grad_norm = float(np.linalg.norm(l2sp_gradient(w, w0, cfg)))
        self.logger.info(f"L2-SP penalty {penalty:.6g}, gradient norm {grad_norm:.6g} (alpha {cfg.alpha:g})")
        return {"alpha": cfg.alpha, "n_weights": int(w.shape[0]), "penalty": penalty, "grad_norm": grad_norm}

    def schedule(
        self,
        kind: str,
        lr: Optional[float],
        epochs: int,
        out: Optional[PathLike] = None,
        csv_out: Optional[PathLike] = None,
        weights: Optional[PathLike] = None,
        reference: Optional[PathLike] = None,
        alpha: float = DEFAULT_L2SP_ALPHA,
    ) -> dict:
        """
        Learning-rate table ("fade" or "const"), or the L2-SP check of two
        weight files ("l2sp-check"). Weight files given with a table kind add
        the penalty to the table document.
        """
        if kind not in SCHEDULE_KINDS:
            raise ConfigurationError(f"unknown schedule kind {kind!r}")
        if (weights is None) != (reference is None):
            raise ConfigurationError("the L2-SP check needs both weights and reference weights")

        if kind == "l2sp-check":
            if weights is None:
                raise ConfigurationError("l2sp-check needs weights and reference weights")
            document = {"kind": kind, **self.l2sp_check(weights, reference, alpha)}
            self.emit(dump_json(document), out)
            return document

        if lr is None:
            lr = DEFAULT_FADE_LR if kind == "fade" else DEFAULT_CONST_LR
        values = linear_fade(lr, epochs) if kind == "fade" else const_schedule(lr, epochs)
        rows = schedule_rows(values)
        document = {"kind": kind, "lr0": lr, "epochs": epochs, "lr": [value for _, value in rows]}
        if weights is not None:
            document["l2sp"] = self.l2sp_check(weights, reference, alpha)

        self.emit(dump_json(document), out)
        if csv_out is not None:
            self.csv_handler.write_table(csv_out, SCHEDULE_HEADERS, [[e, repr(v)] for e, v in rows])
        return document


def _check_cloud_frame(cloud_frame: str) -> None:
    if cloud_frame not in CLOUD_FRAMES:
        raise ConfigurationError(f"unknown cloud frame {cloud_frame!r}")
