"""
KITTI-protocol evaluation: geometry helpers and AP metrics.
"""

from napselect.evaluation.geometry import (
    bev_corners, points_in_box_mask, lidar_to_camera_axes, camera_to_lidar_axes, polygon_area, clip_convex,
)
from napselect.evaluation.metrics import (
    APResult, EvalResult, FrameMatches, IOU_FUNCTIONS, PR_CURVE_HEADERS, iou_bev, iou_3d, points_in_box,
    filter_gt_min_points, match_detections, average_precision, evaluate,
)
