from typing import Callable, Mapping

import numpy as np

from ..exceptions import NonFiniteError, ShapeError
from .tensor import GradTape, Tensor, backward

_DEFAULT_BETA1 = 0.9
_DEFAULT_BETA2 = 0.999
_DEFAULT_EPS = 1e-8


class AdamState:
    __slots__ = ("lr", "beta1", "beta2", "eps", "step", "m", "v")
    lr: float
    beta1: float
    beta2: float
    eps: float
    step: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]

    def __init__(
        self,
        lr: float,
        beta1: float = _DEFAULT_BETA1,
        beta2: float = _DEFAULT_BETA2,
        eps: float = _DEFAULT_EPS,
    ) -> None:
        if lr <= 0:
            raise ValueError(f"learning rate must be > 0, got {lr}")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m = {}
        self.v = {}

    def state(self) -> dict[str, np.ndarray]:
        out = {"adam.step": np.array([self.step], dtype=np.int64)}
        out.update({f"adam.m.{k}": v for k, v in self.m.items()})
        out.update({f"adam.v.{k}": v for k, v in self.v.items()})
        return out


def adam_step(params: Mapping[str, Tensor], grads: Mapping[str, np.ndarray], state: AdamState) -> AdamState:
    """
    One bias-corrected Adam update, applied in place to ``params``.

    Args:
        params: trainable tensors by name
        grads: gradient arrays by the same names
        state: moments and step counter, updated in place

    Returns:
        ``state``, with ``step`` incremented by one
    """
    if state.lr <= 0:
        raise ValueError(f"learning rate must be > 0, got {state.lr}")
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} does not match its parameter", [p.shape, g.shape])
        if not np.isfinite(g).all():
            raise NonFiniteError(f"non-finite gradient for {name}", op="adam_step", step=state.step + 1)
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p.data)
            v = np.zeros_like(p.data)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.m[name] = m.astype(p.data.dtype)
        state.v[name] = v.astype(p.data.dtype)
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p.data = (p.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(p.data.dtype)
    return state


def train_step(loss_fn: Callable[[], Tensor], params: Mapping[str, Tensor], state: AdamState) -> float:
    """Record ``loss_fn()`` on a fresh tape, backpropagate, apply one Adam update and return the loss."""
    with GradTape() as tape:
        loss = loss_fn()
    value = loss.item()
    if not np.isfinite(value):
        raise NonFiniteError(f"loss is {value}", op="loss", step=state.step + 1)
    adam_step(params, backward(loss, tape).named(params), state)
    return value
