"""
Post-training artifacts: the L2-SP penalty anchoring weights to their
pre-trained values, and per-epoch learning-rate tables.
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from napselect.config import DEFAULT_L2SP_ALPHA
from napselect.exceptions import ConfigurationError, DimensionMismatchError


@dataclass(frozen=True)
class L2SPConfig:
    alpha: float = DEFAULT_L2SP_ALPHA

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ConfigurationError(f"L2-SP alpha must be non-negative, got {self.alpha}")


def _difference(w: np.ndarray, w0: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    w0 = np.asarray(w0, dtype=np.float64).reshape(-1)
    if w.shape != w0.shape:
        raise DimensionMismatchError(f"weights of length {w.shape[0]} vs reference of length {w0.shape[0]}")
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(w0))):
        raise ConfigurationError("weights must be finite")
    return w - w0


def l2sp_penalty(w: np.ndarray, w0: np.ndarray, cfg: L2SPConfig) -> float:
    """alpha * ||w - w0||^2"""
    diff = _difference(w, w0)
    return float(cfg.alpha * np.dot(diff, diff))


def l2sp_gradient(w: np.ndarray, w0: np.ndarray, cfg: L2SPConfig) -> np.ndarray:
    """2 alpha (w - w0), elementwise."""
    return 2.0 * cfg.alpha * _difference(w, w0)


def _check_schedule(lr: float, epochs: int) -> None:
    if not lr > 0:
        raise ConfigurationError(f"learning rate must be positive, got {lr}")
    if epochs < 1:
        raise ConfigurationError(f"epochs must be >= 1, got {epochs}")


def linear_fade(lr0: float, epochs: int) -> np.ndarray:
    """lr(e) = lr0 (1 - e / E) for e = 0..E; the last entry is exactly 0."""
    _check_schedule(lr0, epochs)
    return lr0 * (1.0 - np.arange(epochs + 1) / epochs)


def const_schedule(lr: float, epochs: int) -> np.ndarray:
    """Constant learning rate for e = 0..E."""
    _check_schedule(lr, epochs)
    return np.full(epochs + 1, float(lr))


def schedule_rows(values: np.ndarray) -> List[Tuple[int, float]]:
    """(epoch, lr) rows for table export."""
    return [(epoch, float(lr)) for epoch, lr in enumerate(values)]
