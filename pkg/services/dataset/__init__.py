"""
Dataset Package

TUM RGB-D I/O, occlusion labeling, patch extraction and synthetic scenes.
"""

from .labeling import label_image, labels_from_image, make_labels, write_label_png
from .patches import (
    balance_patches,
    compute_stats,
    drop_depth,
    extract_patches,
    extract_sequence,
    grid_positions,
    normalize,
    normalize_tensor,
    patch_label,
    split_sequence,
)
from .synth import analytic_labels, parse_scene_spec, random_scene, synth_scene, synth_sequence, validate_scene
from .tum_io import frame_stem, load_frame, load_sequence, read_gray, write_png, write_sequence

__all__ = [
    "load_sequence",
    "load_frame",
    "frame_stem",
    "write_sequence",
    "write_png",
    "read_gray",
    "make_labels",
    "label_image",
    "labels_from_image",
    "write_label_png",
    "grid_positions",
    "patch_label",
    "extract_patches",
    "extract_sequence",
    "compute_stats",
    "normalize",
    "normalize_tensor",
    "split_sequence",
    "balance_patches",
    "drop_depth",
    "parse_scene_spec",
    "validate_scene",
    "synth_scene",
    "synth_sequence",
    "analytic_labels",
    "random_scene",
]
