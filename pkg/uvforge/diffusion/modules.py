"""
Conditional denoiser: a small three-resolution backbone with two condition slots.

Shapes for an H×W input and base width C::

    conv_in    3  → C      H
    block0     C  → C      H      skip0   (+ control residual 0)
    down0      C  → 2C     H/2
    block1     2C → 2C     H/2    skip1   (detail cross-attention 0, + control residual 1)
    down1      2C → 2C     H/4
    mid        2C → 2C     H/4            (detail cross-attention 1, + control residual 2)
    up1        [mid↑, skip1] 4C → 2C  H/2
    up0        [·↑,  skip0] 3C → C   H
    conv_out   C  → 3      H

The detail slot holds token sequences from a ``DetailExtractor``; the control slot holds
the three residuals from a ``StructureAligner``.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..autodiff import (
    ChannelAttention,
    Conv,
    CrossAttention,
    Linear,
    Module,
    Rng,
    SpatialSelfAttention,
    Tensor,
    as_tensor,
    avg_pool2d,
    concat,
    reshape,
    silu,
    timestep_embedding,
    transpose,
    upsample_nearest2d,
    zero_module,
)
from ..exceptions import ShapeError
from ..types.config import AttentionKind, ModelConfig

HINT_WIDTH = 16


class ResBlock(Module):
    def __init__(self, channels: int, emb_dim: int, rng: Rng) -> None:
        self.conv1 = Conv(channels, channels, 3, rng.child("conv1"))
        self.emb = Linear(emb_dim, channels, rng.child("emb"))
        self.conv2 = Conv(channels, channels, 3, rng.child("conv2"), gain=0.5)

    def __call__(self, x: Tensor, emb: Tensor) -> Tensor:
        n, c = x.shape[:2]
        h = self.conv1(silu(x))
        h = h + reshape(self.emb(silu(emb)), (n, c, 1, 1))
        return x + self.conv2(silu(h))


@dataclass
class DetailSlot:
    """Detail tokens plus the cross-attention adapters that read them."""

    tokens: Tensor
    adapters: Sequence[CrossAttention]
    keep: Optional[np.ndarray] = None

    def attend(self, stage: int, h: Tensor) -> Tensor:
        return self.adapters[stage](h, self.tokens, self.keep)


class Encoder(Module):
    """Downsampling half of the backbone. Copied verbatim into every ``StructureAligner``."""

    def __init__(self, config: ModelConfig, rng: Rng, in_channels: int = 3) -> None:
        c = config.base_channels
        self.conv_in = Conv(in_channels, c, 3, rng.child("conv_in"))
        self.block0 = ResBlock(c, config.embed_dim, rng.child("block0"))
        self.down0 = Conv(c, 2 * c, 3, rng.child("down0"), stride=2)
        self.block1 = ResBlock(2 * c, config.embed_dim, rng.child("block1"))
        self.down1 = Conv(2 * c, 2 * c, 3, rng.child("down1"), stride=2)
        self.mid = ResBlock(2 * c, config.embed_dim, rng.child("mid"))

    def __call__(
        self,
        x: Tensor,
        emb: Tensor,
        detail: Optional[DetailSlot] = None,
        inject: Optional[Tensor] = None,
    ) -> list[Tensor]:
        h = self.conv_in(x)
        if inject is not None:
            h = h + inject
        skip0 = self.block0(h, emb)
        h = self.block1(self.down0(skip0), emb)
        if detail is not None:
            h = detail.attend(0, h)
        skip1 = h
        h = self.mid(self.down1(skip1), emb)
        if detail is not None:
            h = detail.attend(1, h)
        return [skip0, skip1, h]


class Backbone(Module):
    def __init__(self, config: ModelConfig, rng: Rng) -> None:
        c = config.base_channels
        self.time1 = Linear(config.time_dim, config.embed_dim, rng.child("time1"))
        self.time2 = Linear(config.embed_dim, config.embed_dim, rng.child("time2"))
        self.encoder = Encoder(config, rng.child("encoder"))
        self.up_conv1 = Conv(4 * c, 2 * c, 3, rng.child("up_conv1"))
        self.up_block1 = ResBlock(2 * c, config.embed_dim, rng.child("up_block1"))
        self.up_conv0 = Conv(3 * c, c, 3, rng.child("up_conv0"))
        self.up_block0 = ResBlock(c, config.embed_dim, rng.child("up_block0"))
        self.conv_out = Conv(c, 3, 3, rng.child("conv_out"), gain=0.5)
        self._time_dim = config.time_dim

    def embed(self, t: np.ndarray, batch: int) -> Tensor:
        t = np.broadcast_to(np.asarray(t), (batch,))
        return self.time2(silu(self.time1(Tensor(timestep_embedding(t, self._time_dim)))))

    def __call__(
        self,
        x_t: Tensor,
        t: np.ndarray,
        detail: Optional[DetailSlot] = None,
        residuals: Optional[Sequence[Tensor]] = None,
        emb: Optional[Tensor] = None,
    ) -> Tensor:
        if emb is None:
            emb = self.embed(t, x_t.shape[0])
        features = self.encoder(x_t, emb, detail)
        if residuals is not None:
            if len(residuals) != len(features):
                raise ShapeError(
                    f"expected {len(features)} control residuals, got {len(residuals)}",
                    [f.shape for f in features],
                )
            for r, f in zip(residuals, features):
                if r.shape != f.shape:
                    raise ShapeError("control residual does not match its encoder stage", [f.shape, r.shape])
            features = [f + r for f, r in zip(features, residuals)]
        skip0, skip1, h = features
        h = self.up_conv1(concat([upsample_nearest2d(h, 2), skip1], axis=1))
        h = self.up_block1(h, emb)
        h = self.up_conv0(concat([upsample_nearest2d(h, 2), skip0], axis=1))
        h = self.up_block0(h, emb)
        return self.conv_out(silu(h))


def predict_noise(
    backbone: Backbone,
    x_t: Tensor,
    t: np.ndarray,
    detail: Optional[DetailSlot] = None,
    residuals: Optional[Sequence[Tensor]] = None,
) -> Tensor:
    """
    ε̂(x_t, t) with optional detail tokens and control residuals.

    Args:
        backbone: the shared denoiser
        x_t: N×3×H×W noisy input; H and W divisible by 4
        t: one timestep per batch element, or a scalar
        detail: detail tokens and the adapters that consume them
        residuals: one additive residual per encoder stage

    Returns:
        N×3×H×W noise estimate

    Raises:
        ShapeError: when tokens or residuals do not fit the feature maps
    """
    x_t = as_tensor(x_t)
    if x_t.ndim != 4 or x_t.shape[2] % 4 or x_t.shape[3] % 4:
        raise ShapeError("denoiser input must be N×C×H×W with H, W divisible by 4", [x_t.shape])
    return backbone(x_t, t, detail, residuals)


class DetailExtractor(Module):
    """
    Multi-depth convolutional features, concatenated, reweighted by channel attention and
    projected to a sequence of tokens.
    """

    kind = AttentionKind.channel

    def __init__(self, config: ModelConfig, rng: Rng, in_channels: int = 3) -> None:
        c = config.base_channels
        widths = (max(1, c // 2), c, c)
        self.conv0 = Conv(in_channels, widths[0], 3, rng.child("conv0"), stride=2)
        self.conv1 = Conv(widths[0], widths[1], 3, rng.child("conv1"), stride=2)
        self.conv2 = Conv(widths[1], widths[2], 3, rng.child("conv2"), stride=2)
        total = sum(widths)
        self.attention = self._attention(total, config, rng.child("attention"))
        self.proj = Conv(total, config.token_dim, 1, rng.child("proj"))
        self.adapters = [
            CrossAttention(2 * c, config.token_dim, config.attn_dim, rng.child("adapter", i), gate=config.gate_init)
            for i in range(2)
        ]
        self._grid = config.token_grid

    def _attention(self, channels: int, config: ModelConfig, rng: Rng) -> Module:
        return ChannelAttention(channels, config.reduction, rng)

    def features(self, images: Tensor) -> Tensor:
        levels = []
        h = as_tensor(images)
        for conv in (self.conv0, self.conv1, self.conv2):
            h = silu(conv(h))
            levels.append(h)
        grid = min(self._grid, levels[-1].shape[2])
        pooled = []
        for level in levels:
            k = level.shape[2] // grid
            if level.shape[2] != k * grid or level.shape[3] != k * grid:
                raise ShapeError(f"feature map does not tile a {grid}×{grid} token grid", [level.shape])
            pooled.append(avg_pool2d(level, k) if k > 1 else level)
        return self.attention(concat(pooled, axis=1))

    def __call__(self, images: Tensor, views: int = 1) -> Tensor:
        """
        Tokens for a batch of condition images.

        Args:
            images: (B·views)×3×h×w condition images, views of one face adjacent
            views: images per face; their token sequences are concatenated

        Returns:
            B×(views·L)×D tokens, L = grid²
        """
        images = as_tensor(images)
        if images.shape[0] % views:
            raise ShapeError(f"{images.shape[0]} images do not split into groups of {views}", [images.shape])
        feats = self.proj(self.features(images))
        n, d, gh, gw = feats.shape
        tokens = transpose(reshape(feats, (n, d, gh * gw)), (0, 2, 1))
        if views > 1:
            tokens = reshape(tokens, (n // views, views * gh * gw, d))
        return tokens

    def slot(self, tokens: Tensor, keep: Optional[np.ndarray] = None) -> DetailSlot:
        return DetailSlot(tokens=tokens, adapters=self.adapters, keep=keep)


class SelfAttnExtractor(DetailExtractor):
    """DetailExtractor with spatial self-attention over the token grid instead of channel gating."""

    kind = AttentionKind.self_

    def _attention(self, channels: int, config: ModelConfig, rng: Rng) -> Module:
        return SpatialSelfAttention(channels, config.heads, rng)


def make_extractor(kind: AttentionKind, config: ModelConfig, rng: Rng) -> DetailExtractor:
    if AttentionKind(kind) is AttentionKind.self_:
        return SelfAttnExtractor(config, rng)
    return DetailExtractor(config, rng)


class StructureAligner(Module):
    """
    Trainable copy of the backbone encoder driven by a spatial hint. Its outputs pass through
    zero-initialised 1×1 convolutions, so a fresh aligner contributes exactly zero.
    """

    def __init__(self, encoder: Encoder, hint_channels: int, config: ModelConfig, rng: Rng) -> None:
        c = config.base_channels
        self.hint_in = Conv(hint_channels, HINT_WIDTH, 3, rng.child("hint_in"))
        self.hint_out = zero_module(Conv(HINT_WIDTH, c, 3, rng.child("hint_out")))
        self.encoder = encoder
        self.zero = [
            zero_module(Conv(width, width, 1, rng.child("zero", i))) for i, width in enumerate((c, 2 * c, 2 * c))
        ]
        self._hint_channels = hint_channels

    @property
    def hint_channels(self) -> int:
        return self._hint_channels

    @classmethod
    def from_backbone(cls, backbone: Backbone, hint_channels: int, config: ModelConfig, rng: Rng) -> "StructureAligner":
        encoder = Encoder(config, rng.child("encoder"))
        encoder.load_state(backbone.encoder.state())
        return cls(encoder, hint_channels, config, rng)

    def pad_hint(self, hint: np.ndarray) -> np.ndarray:
        """Zero-fill missing trailing hint channels (N×k×H×W → N×hint_channels×H×W)."""
        hint = np.asarray(hint, dtype=np.float32)
        k = hint.shape[1]
        if k > self._hint_channels:
            raise ShapeError(f"hint has more than {self._hint_channels} channels", [hint.shape])
        if k == self._hint_channels:
            return hint
        pad = np.zeros((hint.shape[0], self._hint_channels - k) + hint.shape[2:], dtype=np.float32)
        return np.concatenate([hint, pad], axis=1)

    def __call__(self, x_t: Tensor, hint: np.ndarray, emb: Tensor, keep: Optional[np.ndarray] = None) -> list[Tensor]:
        hint = self.pad_hint(hint)
        if hint.shape[0] != x_t.shape[0] or hint.shape[2:] != x_t.shape[2:]:
            raise ShapeError("hint does not match the denoiser input", [x_t.shape, hint.shape])
        inject = self.hint_out(silu(self.hint_in(Tensor(hint))))
        features = self.encoder(x_t, emb, inject=inject)
        residuals = [zero(f) for zero, f in zip(self.zero, features)]
        if keep is not None:
            scale = keep.reshape(-1, 1, 1, 1)
            residuals = [r * scale for r in residuals]
        return residuals


class Network(Module):
    """Backbone with one detail extractor and one structure aligner; the unit that is trained and checkpointed."""

    def __init__(self, backbone: Backbone, extractor: DetailExtractor, aligner: StructureAligner) -> None:
        self.backbone = backbone
        self.extractor = extractor
        self.aligner = aligner

    def __call__(
        self,
        x_t: Tensor,
        t: np.ndarray,
        detail_images: Optional[np.ndarray] = None,
        hint: Optional[np.ndarray] = None,
        keep: Optional[np.ndarray] = None,
        views: int = 1,
    ) -> Tensor:
        return conditioned_noise(self.backbone, self.extractor, self.aligner, x_t, t, detail_images, hint, keep, views)


def conditioned_noise(
    backbone: Backbone,
    extractor: Optional[DetailExtractor],
    aligner: Optional[StructureAligner],
    x_t: Tensor,
    t: np.ndarray,
    detail_images: Optional[np.ndarray] = None,
    hint: Optional[np.ndarray] = None,
    keep: Optional[np.ndarray] = None,
    views: int = 1,
    tokens: Optional[Tensor] = None,
) -> Tensor:
    """
    Fill the slots from raw conditions and predict noise. Any of the modules may come from a
    different checkpoint than the backbone; that is how assembled models run.
    """
    x_t = as_tensor(x_t)
    detail = None
    if extractor is not None and (tokens is not None or detail_images is not None):
        if tokens is None:
            tokens = extractor(Tensor(detail_images), views=views)
        detail = extractor.slot(tokens, keep)
    residuals = None
    if aligner is not None and hint is not None:
        emb = backbone.embed(t, x_t.shape[0])
        residuals = aligner(x_t, hint, emb, keep)
    return predict_noise(backbone, x_t, t, detail, residuals)
