"""
Procedural ground-truth skin textures.

Every texture is complete over the atlas: a smooth base tone, then optional detail layers
(freckles, wrinkle strokes, a beard patch, lip and eye makeup) stamped into the named
atlas regions. These are the details a recovery model has to carry over from a partial
unwrap, and the textures exist only to score that recovery.
"""

import logging
from typing import Optional

import numpy as np
from scipy.ndimage import gaussian_filter

from ..autodiff.rng import Rng
from ..types.face import FaceParams
from .mesh import region_mask, texel_centers

_logger = logging.getLogger(__name__)

BASE_TONE = np.array([0.80, 0.62, 0.52])
HAIR_COLOR = np.array([0.18, 0.12, 0.09])
LIP_COLOR = np.array([0.72, 0.24, 0.30])
SHADOW_COLOR = np.array([0.45, 0.30, 0.50])


def _unit_field(rng: Rng, size: int, sigma: float) -> np.ndarray:
    field = gaussian_filter(rng.normal(size=(size, size)), sigma=sigma, mode="wrap")
    std = field.std()
    return field / std if std > 0 else field


def _freckles(rng: Rng, size: int) -> np.ndarray:
    dots = np.zeros((size, size))
    count = int(rng.integers(20, 60))
    rows = rng.integers(int(0.40 * size), int(0.75 * size), size=count)
    cols = rng.integers(int(0.30 * size), int(0.70 * size), size=count)
    dots[rows, cols] = rng.uniform(0.5, 1.0, size=count)
    dots = gaussian_filter(dots, sigma=0.7)
    peak = dots.max()
    return dots / peak if peak > 0 else dots


def _wrinkles(rng: Rng, size: int) -> np.ndarray:
    u, v = texel_centers(size)
    lines = np.zeros((size, size))
    forehead = region_mask("forehead", size)
    for _ in range(int(rng.integers(2, 5))):
        v0 = rng.uniform(0.20, 0.33)
        amp = rng.uniform(0.005, 0.02)
        freq = rng.uniform(1.0, 3.0)
        phase = rng.uniform(0.0, 2 * np.pi)
        curve = v0 + amp * np.sin(2 * np.pi * freq * u + phase)
        dist = np.abs(v - curve) * size
        lines = np.maximum(lines, np.exp(-(dist**2) / (2 * 0.6**2)))
    return lines * forehead


def _blend(tex: np.ndarray, weight: np.ndarray, color: np.ndarray) -> np.ndarray:
    w = np.clip(weight, 0.0, 1.0)[..., None]
    return tex * (1.0 - w) + w * color


def synthesize_gt_texture(
    params: FaceParams,
    rng: Rng,
    *,
    uv_size: int = 64,
    detail_prob: float = 0.5,
    beard: Optional[bool] = None,
    makeup: Optional[bool] = None,
) -> np.ndarray:
    """
    Build a complete uv_size×uv_size×3 texture with values in [0, 1].

    Each detail layer is switched on independently with probability ``detail_prob``;
    ``beard`` and ``makeup`` override the draw for those two layers. The base tone shifts
    slightly with the first identity coefficient so textures correlate with shape.
    """
    tone = np.clip(BASE_TONE + rng.normal(0.0, 0.04, size=3) + 0.02 * params.shape_weights[0], 0.3, 0.95)
    skin = _unit_field(rng, uv_size, sigma=8.0)
    tex = tone[None, None, :] * (1.0 + 0.015 * skin[..., None])

    # draws happen whether or not a layer is used so layers stay independent of each other
    freckle_on, wrinkle_on = rng.bernoulli(detail_prob), rng.bernoulli(detail_prob)
    beard_on, makeup_on = rng.bernoulli(detail_prob), rng.bernoulli(detail_prob)
    beard_on = beard_on if beard is None else beard
    makeup_on = makeup_on if makeup is None else makeup
    freckles = _freckles(rng, uv_size)
    wrinkles = _wrinkles(rng, uv_size)
    hair_noise = _unit_field(rng, uv_size, sigma=0.8)

    if freckle_on:
        tex = tex * (1.0 - 0.35 * freckles[..., None])
    if wrinkle_on:
        tex = tex * (1.0 - 0.25 * wrinkles[..., None])
    if beard_on:
        patch = gaussian_filter(region_mask("beard", uv_size).astype(np.float64), sigma=1.5)
        color = HAIR_COLOR[None, None, :] * (1.0 + 0.2 * hair_noise[..., None])
        w = np.clip(0.85 * patch * (1.0 + 0.1 * hair_noise), 0.0, 1.0)[..., None]
        tex = tex * (1.0 - w) + w * color
    if makeup_on:
        lips = gaussian_filter(region_mask("lips", uv_size).astype(np.float64), sigma=1.0)
        shadow = gaussian_filter(region_mask("eyes", uv_size).astype(np.float64), sigma=1.0)
        tex = _blend(tex, 0.6 * lips, LIP_COLOR)
        tex = _blend(tex, 0.3 * shadow, SHADOW_COLOR)

    _logger.debug(
        "texture layers: freckles=%s wrinkles=%s beard=%s makeup=%s", freckle_on, wrinkle_on, beard_on, makeup_on
    )
    return np.clip(tex, 0.0, 1.0).astype(np.float32)
