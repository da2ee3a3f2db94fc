"""
Activation-pattern frame selection: patterns, bank, layer selection and diversity.
"""

from napselect.selection.patterns import (
    BinaryPattern, LayerPatterns, clip_top_half, binarize, extract_pattern, extract_patterns,
    extract_layer_patterns, hamming,
)
from napselect.selection.bank import (
    PatternBank, FrameBitCounts, build_bank, nearest_distance, batch_nearest,
    frame_bit_counts, mean_pairwise_hamming,
)
from napselect.selection.layer_select import LayerScore, auroc, layer_distances, rank_layers, rank_pattern_layers
from napselect.selection.diversity import (
    DistanceHistogram, FrameRecord, SelectionConfig, SelectionResult, SelectionStep,
    distance_histogram, entropy, frame_dist, max_norm, select_frames, random_frames,
    build_frame_record, build_frame_records,
)
