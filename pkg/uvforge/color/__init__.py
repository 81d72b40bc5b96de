from .lab import (
    ColorTransfer,
    LabStats,
    gamut_clamp_count,
    lab_to_rgb,
    lab_to_rgb_unclipped,
    rgb_to_lab,
    transfer_stats,
)

__all__ = [
    "ColorTransfer",
    "LabStats",
    "gamut_clamp_count",
    "lab_to_rgb",
    "lab_to_rgb_unclipped",
    "rgb_to_lab",
    "transfer_stats",
]
