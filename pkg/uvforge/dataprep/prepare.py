"""
Training tuples from one face.

Pipeline for one sample (the in-the-wild image is rendered with the TRUE face and camera,
every geometric step downstream uses the FITTED ones):

    I      = occluders painted over render(true mesh, GT texture)
    M_I    = M_I^w (true coverage minus occluders) ⊙ M_I^m (fitted coverage)
    I_w    = I ⊙ M_I
    T_w,M_T = unwrap(I_w) under the fitted geometry
    T_m    = proxy texture ⊙ M_T
    T_uv   = UV position map ⊙ M_T
    I_m    = render(fitted mesh, T_m)
    I_uv   = rendered UV position ⊙ M_I
    I_lm   = blobs at true landmark projections plus detector jitter
"""

import logging
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np
from scipy.ndimage import gaussian_filter

from ..autodiff.rng import Rng
from ..exceptions import SampleRejectedError
from ..render import (
    atlas_mask,
    project_landmarks,
    rasterize,
    render_texture,
    render_uv_position,
    unwrap,
    uv_position_map,
)
from ..types.config import CorpusConfig
from ..types.face import FaceParams, Scene
from ..world.mesh import build_mesh
from .masks import composite_occluders, compose_masks, skin_mask_wild

_logger = logging.getLogger(__name__)

UNIT_GAIN = (1.0, 1.0, 1.0)


@dataclass(frozen=True)
class TrainingSample:
    sample_id: str
    I_w: np.ndarray  # H×W×3 masked in-the-wild image
    M_I: np.ndarray  # H×W bool
    T_w: np.ndarray  # S×S×3 unwrapped texture
    M_T: np.ndarray  # S×S bool
    T_m: np.ndarray  # S×S×3 masked proxy texture
    T_uv: np.ndarray  # S×S×3 masked UV position map
    I_m: np.ndarray  # H×W×3 rendered proxy texture
    I_uv: np.ndarray  # H×W×3 masked rendered UV position
    I_lm: np.ndarray  # H×W landmark blobs
    uv_position_full: np.ndarray  # S×S×3 complete UV position map of the fitted mesh
    image: Optional[np.ndarray] = None  # H×W×3 unmasked in-the-wild image

    @classmethod
    def tensor_names(cls) -> list[str]:
        return [f.name for f in fields(cls) if f.name != "sample_id"]

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.tensor_names() if getattr(self, name) is not None}


def proxy_texture(gt: np.ndarray, sigma: float = 4.0) -> np.ndarray:
    """
    Low-frequency stand-in for a 3DMM albedo: a Gaussian blur normalised by the blurred
    atlas mask, so no colour leaks in from outside the atlas. Zero off the atlas.
    """
    valid = atlas_mask(gt.shape[0]).astype(np.float64)
    weight = gaussian_filter(valid, sigma=sigma, mode="constant")
    out = np.zeros_like(gt, dtype=np.float32)
    inside = valid > 0
    for c in range(gt.shape[2]):
        blurred = gaussian_filter(gt[..., c].astype(np.float64) * valid, sigma=sigma, mode="constant")
        out[..., c][inside] = blurred[inside] / weight[inside]
    return out


def split_views(texture: np.ndarray, mask: np.ndarray, k: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """
    Split an unwrap into ``k`` complementary vertical bands of the atlas.

    Bands with an empty mask are dropped, so fewer than ``k`` views may come back.
    """
    if k < 1:
        raise ValueError(f"view count must be at least 1, got {k}")
    size = mask.shape[1]
    edges = np.linspace(0, size, k + 1).round().astype(int)
    views = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        band = np.zeros_like(mask)
        band[:, lo:hi] = mask[:, lo:hi]
        if band.any():
            views.append((texture * band[..., None], band))
    return views


def prepare_sample(
    gt_texture: np.ndarray,
    true_params: FaceParams,
    true_scene: Scene,
    fitted_params: FaceParams,
    fitted_scene: Scene,
    config: CorpusConfig,
    rng: Rng,
    sample_id: str = "sample",
) -> TrainingSample:
    """
    Build every training tensor for one face.

    Args:
        gt_texture: complete ground-truth texture, only ever rendered, never stored in the sample
        true_params, true_scene: what the image is rendered with
        fitted_params, fitted_scene: the imperfect fit used for all geometry
        config: resolutions, proxy blur and landmark jitter
        rng: stream for landmark detector noise
        sample_id: used in diagnostics

    Returns:
        the TrainingSample

    Raises:
        SampleRejectedError: when the combined skin mask M_I is empty
    """
    size, uv_size = config.image_size, config.uv_size
    true_mesh = build_mesh(true_params)
    fit_mesh = build_mesh(fitted_params)
    frag_true = rasterize(true_mesh, true_scene, size)
    frag_fit = rasterize(fit_mesh, fitted_scene, size)

    image = composite_occluders(render_texture(frag_true, gt_texture), true_scene)
    m_wild = skin_mask_wild(true_scene, frag_true)
    m_i = compose_masks(m_wild, frag_fit.covered)
    if not m_i.any():
        raise SampleRejectedError("combined skin mask is empty", sample_id, "empty_skin_mask")

    i_w = image * m_i[..., None]
    t_w, m_t = unwrap(i_w, fit_mesh, fitted_scene, uv_size, image_mask=m_i)
    t_m = proxy_texture(gt_texture, config.proxy_sigma) * m_t[..., None]
    full = uv_position_map(fit_mesh, uv_size).positions
    t_uv = full * m_t[..., None]
    i_m = render_texture(frag_fit, t_m, gain=UNIT_GAIN)
    i_uv = render_uv_position(frag_fit) * m_i[..., None]

    true_points = true_scene.project(true_mesh.vertices[true_mesh.landmark_indices], size)[:, :2]
    detected = true_points + rng.normal(0.0, config.landmark_jitter, size=true_points.shape)
    landmarks = project_landmarks(true_mesh, true_scene, size, frag=frag_true, points=detected)

    if not m_t.any():
        _logger.warning("sample %s unwrapped to an empty UV mask", sample_id)
    return TrainingSample(
        sample_id=sample_id,
        I_w=i_w.astype(np.float32),
        M_I=m_i,
        T_w=t_w,
        M_T=m_t,
        T_m=t_m.astype(np.float32),
        T_uv=t_uv.astype(np.float32),
        I_m=i_m,
        I_uv=i_uv.astype(np.float32),
        I_lm=landmarks.image,
        uv_position_full=full,
        image=image,
    )
