"""Contrast enhancement for depth-degraded volumetric microscopy.

The heavy lifting lives in the compiled extension; this package re-exports
its public surface.
"""

from deepcontrast._core import (  # noqa: F401
    __version__,
    alpha_schedule,
    best_threshold_iou,
    checkpoint_info,
    clahe,
    degrade_volume,
    double_degrade,
    enhance,
    estimate_gain,
    gaussian_blur,
    generate_phantom,
    iou,
    iteration_sweep,
    pci,
    percentile,
    read_volume,
    ssim,
    threshold_mask,
    train_model,
    wci,
    write_volume,
)

__all__ = [
    "__version__",
    "alpha_schedule",
    "best_threshold_iou",
    "checkpoint_info",
    "clahe",
    "degrade_volume",
    "double_degrade",
    "enhance",
    "estimate_gain",
    "gaussian_blur",
    "generate_phantom",
    "iou",
    "iteration_sweep",
    "pci",
    "percentile",
    "read_volume",
    "ssim",
    "threshold_mask",
    "train_model",
    "wci",
    "write_volume",
]
