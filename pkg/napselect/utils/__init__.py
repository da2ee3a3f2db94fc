"""
Utility modules for the NapSelect package.
"""

from napselect.utils.logging import setup_logging
from napselect.utils.csv_handler import CSVHandler
from napselect.utils.kitti_handler import KittiHandler
from napselect.utils.dump_handler import DumpHandler
