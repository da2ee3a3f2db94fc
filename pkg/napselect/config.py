"""
Configuration settings for the NapSelect package.
"""

import os
import logging
from pathlib import Path
from typing import Dict, Tuple

# Base directory structure
OUTPUT_DIR = Path("nap_output")

# Pattern cache index inside a cache directory
PATTERN_INDEX_FILE = "index.json"

# Frame selection defaults
DEFAULT_TARGET_COUNT = 10
DEFAULT_PROPOSAL_FACTOR = 10
DEFAULT_MIN_BOXES = 1

# Evaluation defaults
DEFAULT_MIN_POINTS = 50
DEFAULT_IOU_THRESHOLDS = (0.5, 0.7)
DEFAULT_EVAL_CLASS = "Car"
R40_RECALL_POINTS = tuple(k / 40.0 for k in range(1, 41))
R11_RECALL_POINTS = tuple(k / 10.0 for k in range(0, 11))

# Point cloud defaults
DEFAULT_INTENSITY_DIVISOR = 255.0
POINT_RECORD_BYTES = 16

# Activation values below this are rejected, values in [-tolerance, 0) are clamped to 0
ACTIVATION_NEGATIVE_TOLERANCE = 1e-9

# Binary file magics and versions
DUMP_MAGIC = b"NAPD"
DUMP_VERSION = 1
PATTERN_MAGIC = b"NAPB"
PATTERN_VERSION = 1

# Post-training schedule defaults
DEFAULT_EPOCHS = 40
DEFAULT_FADE_LR = 0.01
DEFAULT_CONST_LR = 0.001
DEFAULT_L2SP_ALPHA = 0.01

# Environment variable capping internal parallelism (0 = auto)
THREADS_ENV_VAR = "NAP_THREADS"

# Average car bounding box size (l, w, h) in meters per dataset
BUNDLED_SIZE_STATS: Dict[str, Dict[str, Tuple[float, float, float]]] = {
    "kitti": {"Car": (4.4, 1.79, 1.49)},
    "nuscenes": {"Car": (4.61, 1.95, 1.73)},
    "waymo": {"Car": (5.15, 1.93, 1.71)},
}


def configure_threads() -> int:
    """
    Cap numba's thread pool from the NAP_THREADS environment variable.

    Returns:
        Number of threads in effect
    """
    import numba

    logger = logging.getLogger(__name__)
    raw = os.environ.get(THREADS_ENV_VAR, "0").strip() or "0"
    try:
        requested = int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {THREADS_ENV_VAR}={raw!r}")
        requested = 0

    available = numba.config.NUMBA_NUM_THREADS
    if requested > 0:
        numba.set_num_threads(min(requested, available))
    return numba.get_num_threads()
