"""
UV texture recovery and the editing applications built on it.
"""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..autodiff import Rng, Tensor
from ..color import transfer_stats
from ..dataprep import TrainingSample, split_views
from ..diffusion import ddim_sample, to_nchw, to_unit
from ..exceptions import ShapeError
from ..render import atlas_mask
from ..runlog import EventLog
from ..types.config import SampleConfig

if TYPE_CHECKING:
    from .assemble import InferenceModel

_logger = logging.getLogger(__name__)

_PARALLEL_EPS = 1e-6
_ZERO_NORM = 1e-12


class RecoveryRequest(BaseModel):
    """
    One or more partial unwraps of a face plus its complete UV position map.

    Views are S×S×3 arrays in [0, 1], zero outside their masks; masks are S×S bool.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    views: list[np.ndarray] = Field(description="Partial unwraps T_w.")
    masks: list[np.ndarray] = Field(description="Validity mask of each view.")
    position_map: np.ndarray = Field(description="Complete UV position map of the fitted mesh.")
    guidance: float = Field(default=1.4, description="Classifier-free guidance scale.")
    steps: int = Field(default=30, ge=1, description="DDIM steps.")
    seed: int = Field(default=11, ge=0, description="Seed of the initial noise.")
    color_adjust: bool = Field(default=True, description="Match Lab statistics of the reference skin.")
    reference_image: Optional[np.ndarray] = Field(default=None, description="In-the-wild image I_w.")
    reference_mask: Optional[np.ndarray] = Field(default=None, description="Skin mask M_I of the reference.")
    sample_id: Optional[str] = None

    @model_validator(mode="after")
    def _consistent(self) -> "RecoveryRequest":
        if not self.views:
            raise ValueError("a recovery request needs at least one partial view")
        if len(self.masks) != len(self.views):
            raise ValueError(f"{len(self.views)} views but {len(self.masks)} masks")
        size = self.position_map.shape[0]
        if self.position_map.shape != (size, size, 3):
            raise ValueError(f"position map must be S×S×3, got {self.position_map.shape}")
        for i, (view, mask) in enumerate(zip(self.views, self.masks)):
            if view.shape != (size, size, 3) or mask.shape != (size, size):
                raise ValueError(f"view {i} has shape {view.shape}/{mask.shape}, expected {size}×{size} rasters")
        if self.color_adjust and (self.reference_image is None or self.reference_mask is None):
            raise ValueError("colour adjustment needs a reference image and mask")
        return self

    @classmethod
    def from_sample(
        cls, sample: TrainingSample, config: SampleConfig, *, color_adjust: Optional[bool] = None
    ) -> "RecoveryRequest":
        """Request built from a corpus sample: its unwrap split into ``config.views`` bands."""
        views = split_views(sample.T_w, sample.M_T, config.views) or [(sample.T_w, sample.M_T)]
        return cls(
            views=[v for v, _ in views],
            masks=[m for _, m in views],
            position_map=sample.uv_position_full,
            guidance=config.guidance,
            steps=config.steps,
            seed=config.seed,
            color_adjust=config.color_adjust if color_adjust is None else color_adjust,
            reference_image=sample.I_w,
            reference_mask=sample.M_I,
            sample_id=sample.sample_id,
        )

    @property
    def uv_size(self) -> int:
        return self.position_map.shape[0]

    def union_mask(self) -> np.ndarray:
        return np.logical_or.reduce([np.asarray(m, dtype=bool) for m in self.masks])


@dataclass(frozen=True)
class RecoveryResult:
    texture: np.ndarray  # S×S×3 in [0, 1], zero outside the atlas
    raw: np.ndarray  # sampler output before colour adjustment
    color_adjusted: bool
    clamped: int = 0  # channel values clipped by the colour transfer


def recover_uv(
    model: "InferenceModel",
    request: RecoveryRequest,
    *,
    tokens: Optional[Tensor] = None,
    log: Optional[EventLog] = None,
) -> RecoveryResult:
    """
    Sample a complete UV texture conditioned on every partial view and the position map.

    Args:
        model: assembled inference model
        request: views, position map and sampler settings
        tokens: precomputed detail tokens replacing those of ``request.views``
        log: receives sampler aborts and colour-transfer warnings

    Returns:
        the recovered texture over the atlas validity mask

    Raises:
        SamplerAbortedError: when the trajectory turns non-finite
    """
    size = request.uv_size
    if tokens is None:
        tokens = model.tokens(request.views)
    hint = to_nchw([request.position_map])
    x_init = Rng(request.seed, "recover").normal(0.0, 1.0, (1, 3, size, size))
    x = ddim_sample(model.predictor(tokens, hint), x_init, model.schedule, request.steps, request.guidance, log=log)
    valid = atlas_mask(size)
    raw = np.clip(to_unit(x[0].transpose(1, 2, 0)), 0.0, 1.0).astype(np.float32)
    raw = np.where(valid[..., None], raw, np.float32(0.0))
    if not request.color_adjust:
        return RecoveryResult(texture=raw, raw=raw, color_adjusted=False)
    transfer = transfer_stats(raw, valid, request.reference_image, request.reference_mask, log=log)
    if log is not None:
        log.emit("recovered", sample=request.sample_id, clamped=transfer.clamped)
    return RecoveryResult(texture=transfer.texture, raw=raw, color_adjusted=True, clamped=transfer.clamped)


def slerp_embeddings(a, b, tau: float) -> np.ndarray:
    """
    Spherical interpolation of each token vector (last axis) from ``a`` (τ=0) to ``b`` (τ=1).

    Parallel, antipodal and zero-length pairs are interpolated linearly.
    """
    a = a.data if isinstance(a, Tensor) else np.asarray(a)
    b = b.data if isinstance(b, Tensor) else np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError("token sequences differ in shape", [a.shape, b.shape])
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"interpolation weight must lie in [0, 1], got {tau}")
    if tau == 0.0:
        return a.copy()
    if tau == 1.0:
        return b.copy()
    a64, b64 = a.astype(np.float64), b.astype(np.float64)
    na = np.linalg.norm(a64, axis=-1, keepdims=True)
    nb = np.linalg.norm(b64, axis=-1, keepdims=True)
    degenerate = (na < _ZERO_NORM) | (nb < _ZERO_NORM)
    cos = np.sum(a64 * b64, axis=-1, keepdims=True) / np.where(degenerate, 1.0, na * nb)
    omega = np.arccos(np.clip(cos, -1.0, 1.0))
    sin = np.sin(omega)
    degenerate |= sin < _PARALLEL_EPS
    safe = np.where(degenerate, 1.0, sin)
    wa = np.where(degenerate, 1.0 - tau, np.sin((1.0 - tau) * omega) / safe)
    wb = np.where(degenerate, tau, np.sin(tau * omega) / safe)
    return (wa * a64 + wb * b64).astype(a.dtype)


def compose_edit(
    base: np.ndarray, base_mask: np.ndarray, layers: Sequence[tuple[np.ndarray, np.ndarray]]
) -> tuple[np.ndarray, np.ndarray]:
    """
    Layer region unwraps over a base unwrap: later layers win inside their masks and the
    result's mask is the union of all masks.
    """
    texture = np.array(base, copy=True)
    mask = np.array(base_mask, dtype=bool, copy=True)
    for i, (layer, layer_mask) in enumerate(layers):
        layer_mask = np.asarray(layer_mask, dtype=bool)
        if layer.shape != texture.shape or layer_mask.shape != mask.shape:
            raise ShapeError(f"edit layer {i} does not match the base unwrap", [texture.shape, layer.shape])
        texture[layer_mask] = layer[layer_mask]
        mask |= layer_mask
    return texture, mask


def interpolate(
    model: "InferenceModel",
    request: RecoveryRequest,
    views_b: Sequence[np.ndarray],
    taus: Sequence[float],
    *,
    log: Optional[EventLog] = None,
) -> list[RecoveryResult]:
    """
    Recover one texture per τ from tokens slerped between ``request.views`` and ``views_b``.

    The position map, seed and sampler settings of ``request`` are shared by every τ.
    """
    tokens_a = model.tokens(request.views)
    tokens_b = model.tokens(views_b)
    if tokens_a.shape != tokens_b.shape:
        raise ShapeError("both faces need the same number of views", [tokens_a.shape, tokens_b.shape])
    results = []
    for tau in taus:
        mixed = Tensor(slerp_embeddings(tokens_a, tokens_b, tau))
        _logger.info(f"Interpolating at tau={tau}")
        results.append(recover_uv(model, request, tokens=mixed, log=log))
    return results
