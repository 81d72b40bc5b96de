import math
from typing import Any, Mapping, Optional

import numpy as np

from ..exceptions import CheckpointError, ShapeError
from .ops import conv2d, matmul, relu, reshape, sigmoid, softmax, tanh, transpose
from .rng import Rng
from .tensor import Tensor


class Module:
    """
    Parameter container. Every public ``Tensor`` attribute is a parameter; nested modules
    (directly or in lists) contribute parameters under dotted names.
    """

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for key, value in vars(self).items():
            if key.startswith("_"):
                continue
            name = f"{prefix}{key}"
            if isinstance(value, Tensor):
                out[name] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(f"{name}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{name}.{i}."))
                    elif isinstance(item, Tensor):
                        out[f"{name}.{i}"] = item
        return out

    def trainable(self) -> dict[str, Tensor]:
        return {n: p for n, p in self.named_parameters().items() if p.requires_grad}

    def num_parameters(self) -> int:
        return sum(p.size for p in self.named_parameters().values())

    def freeze(self) -> "Module":
        for p in self.named_parameters().values():
            p.requires_grad = False
        return self

    def state(self) -> dict[str, np.ndarray]:
        return {n: p.data.copy() for n, p in self.named_parameters().items()}

    def load_state(self, state: Mapping[str, np.ndarray]) -> "Module":
        params = self.named_parameters()
        offending = sorted(set(params) ^ set(state))
        offending += [
            f"{n} {tuple(state[n].shape)}!={p.shape}"
            for n, p in params.items()
            if n in state and tuple(state[n].shape) != p.shape
        ]
        if offending:
            raise CheckpointError(f"{type(self).__name__} state does not match", offending)
        for n, p in params.items():
            p.data = np.array(state[n], dtype=p.data.dtype)
        return self


def _init(rng: Rng, shape: tuple[int, ...], fan_in: int, gain: float = 1.0) -> Tensor:
    std = gain / math.sqrt(max(1, fan_in))
    return Tensor(rng.normal(0.0, std, shape), requires_grad=True)


def _zeros(shape: tuple[int, ...]) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


def zero_module(module: Module) -> Module:
    for p in module.named_parameters().values():
        p.data = np.zeros_like(p.data)
    return module


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: Rng, gain: float = 1.0) -> None:
        self.w = _init(rng, (in_features, out_features), in_features, gain)
        self.b = _zeros((out_features,))

    def __call__(self, x: Tensor) -> Tensor:
        return matmul(x, self.w) + self.b


class Conv(Module):
    def __init__(
        self,
        in_ch: int,
        out_ch: int,
        k: int,
        rng: Rng,
        *,
        stride: int = 1,
        pad: Optional[int] = None,
        gain: float = 1.0,
    ) -> None:
        self.w = _init(rng, (out_ch, in_ch, k, k), in_ch * k * k, gain)
        self.b = _zeros((out_ch,))
        self._stride = stride
        self._pad = k // 2 if pad is None else pad

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.w, stride=self._stride, pad=self._pad, bias=self.b)


class ChannelAttention(Module):
    """Squeeze, bottleneck, sigmoid gate, per-channel scale."""

    def __init__(self, channels: int, reduction: int, rng: Rng) -> None:
        hidden = max(1, channels // reduction)
        self.w1 = _init(rng, (channels, hidden), channels)
        self.b1 = _zeros((hidden,))
        self.w2 = _init(rng, (hidden, channels), hidden)
        self.b2 = _zeros((channels,))

    def __call__(self, features: Tensor) -> Tensor:
        return channel_attention(features, self)


def channel_attention(features: Tensor, params: Any) -> Tensor:
    """
    Gate each channel of an NCHW tensor by a sigmoid of its globally pooled response.

    Args:
        features: N×C×H×W tensor
        params: object with ``w1`` (C×r), ``b1`` (r), ``w2`` (r×C), ``b2`` (C); r >= 1

    Returns:
        features × gates broadcast over H and W; gates lie in (0, 1)
    """
    n, c = features.shape[:2]
    if params.w1.ndim != 2 or params.w1.shape[1] < 1:
        raise ShapeError("channel attention bottleneck must be at least 1 wide", [params.w1.shape])
    if params.w1.shape[0] != c or params.w2.shape[1] != c:
        raise ShapeError("channel attention weights do not match channels", [features.shape, params.w1.shape])
    squeeze = features.mean(axis=(2, 3))
    hidden = relu(matmul(squeeze, params.w1) + params.b1)
    gates = sigmoid(matmul(hidden, params.w2) + params.b2)
    return features * reshape(gates, (n, c, 1, 1))


class SpatialSelfAttention(Module):
    """Scaled dot-product attention whose tokens are the spatial positions."""

    def __init__(self, channels: int, heads: int, rng: Rng) -> None:
        if channels % heads:
            raise ShapeError(f"{heads} heads do not divide {channels} channels", [(channels,), (heads,)])
        self.wq = _init(rng, (channels, channels), channels)
        self.bq = _zeros((channels,))
        self.wk = _init(rng, (channels, channels), channels)
        self.bk = _zeros((channels,))
        self.wv = _init(rng, (channels, channels), channels)
        self.bv = _zeros((channels,))
        self._heads = heads

    @property
    def heads(self) -> int:
        return self._heads

    def __call__(self, features: Tensor) -> Tensor:
        return spatial_self_attention(features, self)


def spatial_self_attention(features: Tensor, params: Any, *, return_weights: bool = False):
    """
    softmax(QKᵀ/√d)·V over the H·W positions of an NCHW tensor, per head.

    Args:
        features: N×C×H×W tensor
        params: object with ``wq``/``wk``/``wv`` (C×C), ``bq``/``bk``/``bv`` (C) and ``heads``
        return_weights: also return the N×heads×L×L attention matrix

    Returns:
        N×C×H×W tensor (and the weights if requested)
    """
    n, c, h, w = features.shape
    heads = params.heads
    if c % heads:
        raise ShapeError(f"{heads} heads do not divide {c} channels", [features.shape])
    d = c // heads
    length = h * w
    tokens = transpose(reshape(features, (n, c, length)), (0, 2, 1))

    def split(x: Tensor) -> Tensor:
        return transpose(reshape(x, (n, length, heads, d)), (0, 2, 1, 3))

    q = split(matmul(tokens, params.wq) + params.bq)
    k = split(matmul(tokens, params.wk) + params.bk)
    v = split(matmul(tokens, params.wv) + params.bv)
    scores = matmul(q, transpose(k, (0, 1, 3, 2))) * (1.0 / math.sqrt(d))
    weights = softmax(scores, axis=-1)
    out = matmul(weights, v)
    out = reshape(transpose(out, (0, 2, 1, 3)), (n, length, c))
    out = reshape(transpose(out, (0, 2, 1)), (n, c, h, w))
    if return_weights:
        return out, weights
    return out


class CrossAttention(Module):
    """Feature map attends over a token sequence; the result is added back through a tanh gate."""

    def __init__(self, channels: int, token_dim: int, attn_dim: int, rng: Rng, gate: float = 0.5) -> None:
        self.wq = _init(rng, (channels, attn_dim), channels)
        self.wk = _init(rng, (token_dim, attn_dim), token_dim)
        self.wv = _init(rng, (token_dim, channels), token_dim)
        self.gate = Tensor(np.full((1,), gate), requires_grad=True)

    def __call__(self, h: Tensor, tokens: Tensor, keep: Optional[np.ndarray] = None) -> Tensor:
        n, c, hh, ww = h.shape
        if tokens.ndim != 3 or tokens.shape[0] != n or tokens.shape[2] != self.wk.shape[0]:
            raise ShapeError("detail tokens do not match the feature map", [h.shape, tokens.shape])
        queries = matmul(transpose(reshape(h, (n, c, hh * ww)), (0, 2, 1)), self.wq)
        keys = matmul(tokens, self.wk)
        values = matmul(tokens, self.wv)
        scale = 1.0 / math.sqrt(self.wq.shape[1])
        weights = softmax(matmul(queries, transpose(keys, (0, 2, 1))) * scale, axis=-1)
        attended = reshape(transpose(matmul(weights, values), (0, 2, 1)), (n, c, hh, ww))
        delta = attended * reshape(tanh(self.gate), (1, 1, 1, 1))
        if keep is not None:
            delta = delta * keep.reshape(n, 1, 1, 1)
        return h + delta


def timestep_embedding(t: np.ndarray, dim: int) -> np.ndarray:
    """Sinusoidal embedding of integer timesteps, N → N×dim."""
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    args = np.asarray(t, dtype=np.float64).reshape(-1, 1) * freqs.reshape(1, -1)
    return np.concatenate([np.cos(args), np.sin(args)], axis=1).astype(np.float32)
