"""
sRGB ↔ CIELAB (D65) and Lab statistics transfer between masked regions.

The white point is the XYZ image of sRGB white under the conversion matrix, so neutral
greys land on a = b = 0 up to rounding.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..exceptions import ShapeError
from ..runlog import EventLog

_logger = logging.getLogger(__name__)

_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
WHITE = _RGB_TO_XYZ.sum(axis=1)

_DELTA = 6.0 / 29.0
FLAT_SIGMA = 1e-6


def _linearize(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _encode(c: np.ndarray) -> np.ndarray:
    c = np.maximum(c, 0.0)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * c ** (1.0 / 2.4) - 0.055)


def _f(t: np.ndarray) -> np.ndarray:
    return np.where(t > _DELTA**3, np.cbrt(t), t / (3 * _DELTA**2) + 4.0 / 29.0)


def _f_inv(t: np.ndarray) -> np.ndarray:
    return np.where(t > _DELTA, t**3, 3 * _DELTA**2 * (t - 4.0 / 29.0))


def rgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """...×3 sRGB in [0, 1] to ...×3 Lab (L in [0, 100]), float64."""
    rgb = np.asarray(rgb, dtype=np.float64)
    xyz = _linearize(rgb) @ _RGB_TO_XYZ.T / WHITE
    fx, fy, fz = _f(xyz[..., 0]), _f(xyz[..., 1]), _f(xyz[..., 2])
    return np.stack([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)], axis=-1)


def lab_to_rgb_unclipped(lab: np.ndarray) -> np.ndarray:
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    xyz = np.stack([_f_inv(fx), _f_inv(fy), _f_inv(fz)], axis=-1) * WHITE
    linear = xyz @ _XYZ_TO_RGB.T
    return np.where(linear < 0, linear * 12.92, _encode(linear))


def gamut_clamp_count(rgb: np.ndarray) -> int:
    """Number of channel values outside [0, 1]."""
    return int(np.count_nonzero((rgb < 0.0) | (rgb > 1.0)))


def lab_to_rgb(lab: np.ndarray) -> np.ndarray:
    """Inverse of ``rgb_to_lab``; out-of-gamut values are clipped to [0, 1]."""
    return np.clip(lab_to_rgb_unclipped(lab), 0.0, 1.0)


@dataclass(frozen=True)
class LabStats:
    mean: np.ndarray  # (3,) L, a, b
    std: np.ndarray  # (3,) >= 0

    @classmethod
    def of(cls, lab: np.ndarray, mask: np.ndarray) -> "LabStats":
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            raise ValueError("Lab statistics need a non-empty mask")
        values = lab[mask]
        return cls(mean=values.mean(axis=0), std=values.std(axis=0))


@dataclass(frozen=True)
class ColorTransfer:
    texture: np.ndarray  # transferred texture, clipped to [0, 1]
    lab: np.ndarray  # transferred Lab before conversion and clipping
    clamped: int  # channel values clipped into gamut
    source: LabStats
    reference: LabStats
    scale: np.ndarray  # per-channel σ_ref/σ_src, 1 where the source is flat


def transfer_stats(
    source: np.ndarray,
    source_mask: np.ndarray,
    reference: np.ndarray,
    reference_mask: np.ndarray,
    *,
    log: Optional[EventLog] = None,
) -> ColorTransfer:
    """
    Match the masked Lab mean and standard deviation of ``source`` to those of ``reference``.

    Per channel, out = (in − μ_src)·σ_ref/σ_src + μ_ref over ``source_mask``; pixels outside it
    are returned untouched. A channel with σ_src < 1e-6 keeps scale 1, which maps a flat
    source onto the reference mean.

    Args:
        source: S×S×3 texture in [0, 1]
        source_mask: S×S bool, non-empty
        reference: H×W×3 image in [0, 1]
        reference_mask: H×W bool, non-empty

    Returns:
        a ``ColorTransfer`` with the texture, its pre-clip Lab values and the clamp count
    """
    source = np.asarray(source)
    source_mask = np.asarray(source_mask, dtype=bool)
    reference_mask = np.asarray(reference_mask, dtype=bool)
    if source.shape[:2] != source_mask.shape or reference.shape[:2] != reference_mask.shape:
        raise ShapeError("colour transfer masks do not match their images", [source.shape, source_mask.shape])
    src_lab = rgb_to_lab(source)
    src = LabStats.of(src_lab, source_mask)
    ref = LabStats.of(rgb_to_lab(reference), reference_mask)
    flat = src.std < FLAT_SIGMA
    scale = np.where(flat, 1.0, ref.std / np.where(flat, 1.0, src.std))
    if flat.any():
        message = f"flat source colour in Lab channels {np.flatnonzero(flat).tolist()}, keeping their scale at 1"
        if log is not None:
            log.warn("color_flat_source", message, channels=np.flatnonzero(flat).tolist())
        else:
            _logger.warning(message)

    out_lab = src_lab.copy()
    out_lab[source_mask] = (src_lab[source_mask] - src.mean) * scale + ref.mean
    converted = lab_to_rgb_unclipped(out_lab[source_mask])
    clamped = gamut_clamp_count(converted)
    texture = source.copy()
    texture[source_mask] = np.clip(converted, 0.0, 1.0).astype(source.dtype)
    if clamped:
        message = f"colour transfer clipped {clamped} channel values into gamut"
        if log is not None:
            log.warn("color_clamped", message, count=clamped)
        else:
            _logger.warning(message)
    return ColorTransfer(texture=texture, lab=out_lab, clamped=clamped, source=src, reference=ref, scale=scale)
