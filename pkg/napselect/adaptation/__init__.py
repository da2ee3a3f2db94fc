"""
Source-to-target alignment and post-training schedules.
"""

from napselect.adaptation.align import (
    SizeDelta, BeamModel, compute_size_delta, statnorm_labels, statnorm_points, statnorm_frame,
    estimate_beams, downsample_beams,
)
from napselect.adaptation.schedules import (
    L2SPConfig, l2sp_penalty, l2sp_gradient, linear_fade, const_schedule, schedule_rows,
)
