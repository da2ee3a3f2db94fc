import json
import logging

import numpy as np
import pytest

from napselect.selection import BinaryPattern

CAR_LINE = "Car 0.00 0 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59"
# Detector result files write unknown truncation and occlusion as -1
DET_LINE = "Car -1 -1 -1.58 587.01 173.33 614.12 200.12 1.65 1.67 3.64 -0.65 1.71 46.70 -1.59 0.92"

# Bank patterns and the three target frames of the hand-checked selection fixture.
# Distances to the bank: A {0, 2, 4}, B {0, 2}, C {0, 0, 2}; C is far from A, B is close.
BANK_BITS = ("11110000", "00001111")
FRAME_BITS = {
    "A": ("11110000", "11101000", "11001100"),
    "B": ("11110000", "11101000"),
    "C": ("00001111", "00001111", "00010111"),
}
TP_BITS = ("11110000", "00001111")
FP_BITS = ("10101010", "01010101")


def bits_to_values(bits: str) -> list:
    """Activation vector whose extracted pattern is ``bits`` when half the bits are set."""
    return [1.0 if c == "1" else 0.0 for c in bits]


def random_patterns(rng: np.random.Generator, n: int, dim: int) -> list:
    return [BinaryPattern.from_bits(rng.integers(0, 2, size=dim).astype(bool)) for _ in range(n)]


@pytest.fixture(autouse=True)
def reset_package_logger():
    """Drop handlers main() attached so the next test binds to its own streams."""
    yield
    logger = logging.getLogger("napselect")
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def selection_dump(tmp_path):
    """JSONL dump with source gt/tp/fp rows and the A/B/C target frames on layer roi.0."""
    rows = []
    for i, bits in enumerate(BANK_BITS):
        rows.append({"frame": "src", "box": f"g{i}", "layer": "roi.0", "role": "gt", "values": bits_to_values(bits)})
    for i, bits in enumerate(TP_BITS):
        rows.append({"frame": "src", "box": f"t{i}", "layer": "roi.0", "role": "tp", "score": 0.9,
                     "values": bits_to_values(bits)})
    for i, bits in enumerate(FP_BITS):
        rows.append({"frame": "src", "box": f"f{i}", "layer": "roi.0", "role": "fp", "score": 0.6,
                     "values": bits_to_values(bits)})
    for frame_id, patterns in FRAME_BITS.items():
        for i, bits in enumerate(patterns):
            rows.append({"frame": frame_id, "box": f"{frame_id}{i}", "layer": "roi.0", "role": "det",
                         "score": 0.8, "values": bits_to_values(bits)})

    path = tmp_path / "d.jsonl"
    path.write_text("".join(json.dumps(row) + "\n" for row in rows))
    return path
