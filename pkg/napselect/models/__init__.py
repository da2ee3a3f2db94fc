"""
Data models for the NapSelect package.
"""

from napselect.models.box import BoxLabel, Box3D, DONT_CARE
from napselect.models.point_cloud import PointCloud
from napselect.models.activation import ActivationRecord, Role
from napselect.models.size_stats import SizeStats
