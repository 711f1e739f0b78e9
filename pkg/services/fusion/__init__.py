"""
Fusion Package

Full-frame sweep and Gaussian confidence fusion.
"""

from .fusion_service import (
    binarize,
    fuse,
    fwhm_to_sigma,
    gaussian_kernel,
    infer_frame,
    render,
    sweep,
    to_gray,
    write_mask,
)

__all__ = [
    "sweep",
    "gaussian_kernel",
    "fwhm_to_sigma",
    "fuse",
    "binarize",
    "render",
    "to_gray",
    "write_mask",
    "infer_frame",
]
