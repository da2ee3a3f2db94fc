"""
Logging utilities for the NapSelect package.
"""

import os
import logging
import datetime
from pathlib import Path
from typing import Optional, Union


def setup_logging(
    logger_name: str = "napselect",
    log_dir: Optional[Union[str, Path]] = None,
    level: int = logging.INFO,
) -> logging.Logger:
    """
    Configure and set up logging for the application.

    Diagnostics go to standard error; a dated log file is added when
    ``log_dir`` is given.

    Args:
        logger_name: Name for the logger instance
        log_dir: Directory where log files will be stored (optional)
        level: Logging level

    Returns:
        Configured logger instance
    """
    logger = logging.getLogger(logger_name)
    logger.setLevel(level)

    # Only set up handlers if they don't exist already
    if not logger.handlers:
        formatter = logging.Formatter('%(asctime)s - %(levelname)s - %(message)s')

        # Console handler (stderr)
        console_handler = logging.StreamHandler()
        console_handler.setFormatter(formatter)
        logger.addHandler(console_handler)

        if log_dir is not None:
            os.makedirs(log_dir, exist_ok=True)
            timestamp = datetime.datetime.now().strftime('%Y%m%d')
            log_file = os.path.join(log_dir, f"napselect_{timestamp}.log")
            file_handler = logging.FileHandler(log_file)
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)

    return logger
