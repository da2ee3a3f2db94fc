import math

import numpy as np
import pytest

from napselect.evaluation import (
    FrameMatches, average_precision, evaluate, filter_gt_min_points, iou_3d, iou_bev, match_detections,
    points_in_box,
)
from napselect.evaluation.geometry import camera_to_lidar_axes, from_box_local, lidar_to_camera_axes, points_in_box_mask
from napselect.exceptions import ConfigurationError, DataFormatError, EmptyInputError
from napselect.models import Box3D, PointCloud
from napselect.utils import KittiHandler

from conftest import CAR_LINE


def box(x=0.0, y=0.0, z=5.0, h=2.0, w=2.0, l=4.0, yaw=0.0, score=None):
    return Box3D("Car", dims=(h, w, l), location=(x, y, z), yaw=yaw, score=score)


def cloud_of(xyz):
    xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    return PointCloud(np.column_stack([xyz, np.zeros(len(xyz))]))


def rigid(b, dx, dz, theta):
    """Rotate the box about the camera y axis through the origin, then translate in x-z."""
    c, s = math.cos(theta), math.sin(theta)
    x, y, z = b.location
    return Box3D(b.class_name, b.dims, (c * x + s * z + dx, y, -s * x + c * z + dz), b.yaw + theta, b.score)


class TestIoU:

    def test_identical(self):
        assert iou_bev(box(), box()) == 1.0
        assert iou_3d(box(yaw=0.7), box(yaw=0.7)) == 1.0

    def test_disjoint(self):
        assert iou_bev(box(x=0.0), box(x=4.1)) == 0.0
        assert iou_3d(box(x=0.0), box(x=4.1)) == 0.0

    def test_rotated_unit_square(self):
        a = box(h=1.0, w=1.0, l=1.0)
        b = box(h=1.0, w=1.0, l=1.0, yaw=math.pi / 4)
        inter = 2 * (math.sqrt(2) - 1)
        assert iou_bev(a, b) == pytest.approx(inter / (2 - inter), abs=1e-9)
        assert iou_bev(a, b) == pytest.approx(0.7071, abs=1e-4)

    def test_half_height_overlap(self):
        assert iou_3d(box(y=0.0), box(y=-1.0)) == pytest.approx(1 / 3)

    def test_height_disjoint(self):
        assert iou_3d(box(y=0.0), box(y=-2.5)) == 0.0
        assert iou_bev(box(y=0.0), box(y=-2.5)) == 1.0

    def test_symmetric_and_rigid_invariant(self, rng):
        for _ in range(100):
            a = box(*rng.uniform(-3, 3, 3), *rng.uniform(0.5, 6, 3), yaw=rng.uniform(-math.pi, math.pi))
            b = box(*rng.uniform(-3, 3, 3), *rng.uniform(0.5, 6, 3), yaw=rng.uniform(-math.pi, math.pi))
            dx, dz, theta = rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-math.pi, math.pi)
            for fn in (iou_bev, iou_3d):
                assert fn(a, b) == pytest.approx(fn(b, a), abs=1e-9)
                assert fn(a, b) == pytest.approx(fn(rigid(a, dx, dz, theta), rigid(b, dx, dz, theta)), abs=1e-9)

    def test_degenerate_box(self):
        with pytest.raises(DataFormatError, match="non-positive"):
            iou_3d(box(w=0.0), box())

    @pytest.mark.slow
    def test_matches_monte_carlo(self, rng):
        n_samples = 1_000_000
        for _ in range(200):
            a = box(*rng.uniform(-3, 3, 3), *rng.uniform(0.5, 6, 3), yaw=rng.uniform(-math.pi, math.pi))
            b = box(*rng.uniform(-3, 3, 3), *rng.uniform(0.5, 6, 3), yaw=rng.uniform(-math.pi, math.pi))
            local = np.column_stack([
                rng.uniform(-a.length / 2, a.length / 2, n_samples),
                rng.uniform(-a.height, 0.0, n_samples),
                rng.uniform(-a.width / 2, a.width / 2, n_samples),
            ])
            inside_b = points_in_box_mask(from_box_local(local, a), b).mean()
            inter = inside_b * a.volume
            estimate = inter / (a.volume + b.volume - inter)
            assert iou_3d(a, b) == pytest.approx(estimate, abs=0.005)


class TestPointsInBox:

    def test_inside_outside_and_face(self):
        b = box(x=0.0, y=0.0, z=5.0, h=2.0, w=2.0, l=4.0)
        assert points_in_box(cloud_of([0.0, -1.0, 5.0]), b) == 1
        assert points_in_box(cloud_of([10.0, -1.0, 5.0]), b) == 0
        assert points_in_box(cloud_of([2.0, -1.0, 5.0]), b) == 1
        assert points_in_box(cloud_of([0.0, 0.0, 6.0]), b) == 1

    def test_rigid_invariant(self, rng):
        b = box(x=1.0, z=7.0, yaw=0.4)
        xyz = rng.uniform(-3, 10, size=(500, 3))
        theta, dx, dz = 1.1, 3.0, -2.0
        c, s = math.cos(theta), math.sin(theta)
        moved = np.column_stack([c * xyz[:, 0] + s * xyz[:, 2] + dx, xyz[:, 1], -s * xyz[:, 0] + c * xyz[:, 2] + dz])
        assert points_in_box(cloud_of(xyz), b) == points_in_box(cloud_of(moved), rigid(b, dx, dz, theta))

    def test_min_points_boundary(self):
        b = box()
        inside = np.tile([0.0, -1.0, 5.0], (50, 1))
        assert filter_gt_min_points([b], cloud_of(inside), 50) == [b]
        assert filter_gt_min_points([b], cloud_of(inside[:49]), 50) == []
        assert filter_gt_min_points([b, box(x=10.0)], PointCloud.empty(), 50) == []


class TestMatching:

    def test_true_positive(self):
        result = match_detections([box(score=0.9)], [box()], lambda d, g: 0.8, 0.7)
        assert result.det_is_tp == (True,)
        assert result.gt_matched == (True,)

    def test_one_match_per_gt(self):
        result = match_detections([box(score=0.4), box(score=0.9)], [box()], iou_3d, 0.7)
        assert result.det_is_tp == (False, True)
        assert result.det_gt_index == (None, 0)

    def test_below_threshold(self):
        result = match_detections([box(score=0.9)], [box()], lambda d, g: 0.6, 0.7)
        assert result.det_is_tp == (False,)
        assert result.gt_matched == (False,)

    def test_detection_needs_score(self):
        with pytest.raises(DataFormatError):
            match_detections([box()], [box()], iou_3d, 0.7)


def frame(scores, tp, n_gt):
    return FrameMatches(det_scores=tuple(scores), det_is_tp=tuple(tp), gt_matched=(False,) * n_gt)


class TestAveragePrecision:

    def test_perfect(self):
        assert average_precision([frame([0.9], [True], 1)]).ap == 100.0

    def test_half_recall(self):
        assert average_precision([frame([0.9], [True], 2)]).ap == 50.0

    def test_all_false_positives(self):
        assert average_precision([frame([0.9, 0.8], [False, False], 2)]).ap == 0.0

    def test_eleven_point(self):
        result = average_precision([frame([0.9], [True], 2)], interpolation="r11")
        assert result.ap == pytest.approx(100.0 * 6 / 11)

    def test_no_ground_truth(self):
        with pytest.raises(EmptyInputError):
            average_precision([frame([0.9], [False], 0)])

    def test_adding_true_positive_never_lowers(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 20))
            scores = list(rng.uniform(0, 1, n))
            tp = list(rng.integers(0, 2, n).astype(bool))
            n_gt = sum(tp) + int(rng.integers(1, 4))
            before = average_precision([frame(scores, tp, n_gt)]).ap
            after = average_precision([frame(scores + [float(rng.uniform(0, 1))], tp + [True], n_gt)]).ap
            lowest_fp = average_precision([frame(scores + [-1.0], tp + [False], n_gt)]).ap
            assert after >= before - 1e-9
            assert lowest_fp <= before + 1e-9


class TestEvaluate:

    def test_end_to_end(self):
        gt = KittiHandler.parse_label_line(CAR_LINE)
        det = KittiHandler.parse_label_line(CAR_LINE + " 0.9")
        result = evaluate({"000000": [gt], "000001": [gt]}, {"000000": [det]}, ["Car"], [0.5, 0.7])
        assert result.to_dict() == {
            "Car": {"0.5": {"ap": 50.0, "n_gt": 2, "n_tp": 1}, "0.7": {"ap": 50.0, "n_gt": 2, "n_tp": 1}},
        }
        assert result.pr_rows()[0] == ["Car", "0.5", 1, "0.500000", "1.000000"]

    def test_min_points_needs_clouds(self):
        gt = KittiHandler.parse_label_line(CAR_LINE)
        with pytest.raises(ConfigurationError, match="point clouds"):
            evaluate({"000000": [gt]}, {}, ["Car"], [0.7], min_points=50)


class TestAxes:

    def test_lidar_camera_permutation(self):
        lidar = np.array([[5.0, 0.0, 1.0], [1.0, 2.0, 3.0]])
        camera = lidar_to_camera_axes(lidar)
        np.testing.assert_array_equal(camera, [[0.0, -1.0, 5.0], [-2.0, -3.0, 1.0]])
        np.testing.assert_array_equal(camera_to_lidar_axes(camera), lidar)
