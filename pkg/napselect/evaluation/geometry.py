"""
Box and polygon geometry in KITTI camera-frame convention.

Bird's-eye view is the x-z plane; up is -y; a box's ``location`` is its
bottom-face center and yaw rotates about the camera y axis.
"""

from typing import List, Sequence, Tuple

import numpy as np

from napselect.models import Box3D

VERTEX_TOLERANCE = 1e-9
INSIDE_TOLERANCE = 1e-9

Point2 = Tuple[float, float]


def bev_corners(box: Box3D) -> np.ndarray:
    """Footprint corners as a (4, 2) array of (x, z), counter-clockwise."""
    half_l, half_w = box.length / 2.0, box.width / 2.0
    local = np.array([
        [half_l, half_w],
        [-half_l, half_w],
        [-half_l, -half_w],
        [half_l, -half_w],
    ])
    c, s = np.cos(box.yaw), np.sin(box.yaw)
    x = box.location[0] + c * local[:, 0] + s * local[:, 1]
    z = box.location[2] - s * local[:, 0] + c * local[:, 1]
    return np.column_stack([x, z])


def to_box_local(xyz: np.ndarray, box: Box3D) -> np.ndarray:
    """
    Camera-frame points to box-local (lx, ly, lz): lx along the length,
    lz along the width, ly measured from the bottom face (inside: [-h, 0]).
    """
    xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    dx = xyz[:, 0] - box.location[0]
    dz = xyz[:, 2] - box.location[2]
    c, s = np.cos(box.yaw), np.sin(box.yaw)
    return np.column_stack([c * dx - s * dz, xyz[:, 1] - box.location[1], s * dx + c * dz])


def from_box_local(local: np.ndarray, box: Box3D) -> np.ndarray:
    """Inverse of to_box_local."""
    local = np.asarray(local, dtype=np.float64).reshape(-1, 3)
    c, s = np.cos(box.yaw), np.sin(box.yaw)
    x = box.location[0] + c * local[:, 0] + s * local[:, 2]
    z = box.location[2] - s * local[:, 0] + c * local[:, 2]
    return np.column_stack([x, local[:, 1] + box.location[1], z])


def points_in_box_mask(xyz: np.ndarray, box: Box3D) -> np.ndarray:
    """Boolean mask of points inside the box; faces count as inside."""
    local = to_box_local(xyz, box)
    eps = INSIDE_TOLERANCE
    return (
        (np.abs(local[:, 0]) <= box.length / 2.0 + eps)
        & (np.abs(local[:, 2]) <= box.width / 2.0 + eps)
        & (local[:, 1] <= eps)
        & (local[:, 1] >= -box.height - eps)
    )


def lidar_to_camera_axes(xyz: np.ndarray) -> np.ndarray:
    """Nominal KITTI axis permutation: x_cam = -y, y_cam = -z, z_cam = x."""
    xyz = np.asarray(xyz).reshape(-1, 3)
    return np.column_stack([-xyz[:, 1], -xyz[:, 2], xyz[:, 0]])


def camera_to_lidar_axes(xyz: np.ndarray) -> np.ndarray:
    """Inverse of lidar_to_camera_axes."""
    xyz = np.asarray(xyz).reshape(-1, 3)
    return np.column_stack([xyz[:, 2], -xyz[:, 0], -xyz[:, 1]])


def polygon_area(polygon: Sequence[Point2]) -> float:
    """Shoelace area (absolute) of a simple polygon."""
    if len(polygon) < 3:
        return 0.0
    pts = np.asarray(polygon, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, 1)) - np.dot(y, np.roll(x, 1))))


def _dedupe(polygon: List[Point2]) -> List[Point2]:
    out: List[Point2] = []
    for point in polygon:
        if not out or max(abs(point[0] - out[-1][0]), abs(point[1] - out[-1][1])) > VERTEX_TOLERANCE:
            out.append(point)
    while len(out) > 1 and max(abs(out[0][0] - out[-1][0]), abs(out[0][1] - out[-1][1])) <= VERTEX_TOLERANCE:
        out.pop()
    return out


def clip_convex(subject: Sequence[Point2], clip: Sequence[Point2]) -> List[Point2]:
    """
    Intersection of a polygon with a convex counter-clockwise polygon by
    successive half-plane clipping against each clip edge.

    Returns:
        Vertices of the intersection; empty when the polygons do not overlap
    """
    output: List[Point2] = [tuple(p) for p in subject]
    clip = [tuple(p) for p in clip]
    edge_start = clip[-1]
    for edge_end in clip:
        if not output:
            break
        ex, ey = edge_end[0] - edge_start[0], edge_end[1] - edge_start[1]

        def side(p: Point2) -> float:
            return ex * (p[1] - edge_start[1]) - ey * (p[0] - edge_start[0])

        def intersect(p: Point2, q: Point2) -> Point2:
            sp, sq = side(p), side(q)
            t = sp / (sp - sq)
            return (p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))

        inputs = output
        output = []
        previous = inputs[-1]
        for current in inputs:
            if side(current) >= 0:
                if side(previous) < 0:
                    output.append(intersect(previous, current))
                output.append(current)
            elif side(previous) >= 0:
                output.append(intersect(previous, current))
            previous = current
        output = _dedupe(output)
        edge_start = edge_end
    return output if len(output) >= 3 else []
