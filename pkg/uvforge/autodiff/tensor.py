"""
Dense float tensors and the tape that records operations on them.

Operations are ``Function`` subclasses. ``Function.apply`` runs the forward pass on the raw
arrays, checks the result is finite, and, if a ``GradTape`` is active in the current context
and any input requires a gradient, appends the call to that tape. ``backward`` then replays
the tape in exact reverse order.

Example:

     .. code-block:: python

        from uvforge.autodiff import GradTape, Tensor, backward

        x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        with GradTape() as tape:
            loss = (x * x).sum()
        grads = backward(loss, tape)
        grads[x]  # array([2., 4., 6.])
"""

from contextlib import contextmanager
from contextvars import ContextVar
from typing import Any, Iterator, Mapping, Optional, Sequence, Union

import numpy as np

from ..exceptions import NonFiniteError, TapeError

_dtype: ContextVar[type] = ContextVar("uvforge_dtype", default=np.float32)
_active_tape: ContextVar[Optional["GradTape"]] = ContextVar("uvforge_tape", default=None)

ArrayLike = Union[np.ndarray, float, int, Sequence[float], Sequence[Sequence[float]]]


def default_dtype() -> type:
    return _dtype.get()


@contextmanager
def float64_precision() -> Iterator[None]:
    """Evaluate ops in double precision inside the block. Used for finite-difference checks."""
    token = _dtype.set(np.float64)
    try:
        yield
    finally:
        _dtype.reset(token)


class Tensor:
    __slots__ = ("data", "requires_grad", "name")

    def __init__(self, data: ArrayLike, requires_grad: bool = False, name: Optional[str] = None) -> None:
        self.data = np.asarray(data, dtype=default_dtype())
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.item())

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # operators are defined in ops.py to keep the op table in one place
    def __add__(self, other: Any) -> "Tensor":
        from .ops import add

        return add(self, other)

    def __radd__(self, other: Any) -> "Tensor":
        from .ops import add

        return add(other, self)

    def __sub__(self, other: Any) -> "Tensor":
        from .ops import sub

        return sub(self, other)

    def __rsub__(self, other: Any) -> "Tensor":
        from .ops import sub

        return sub(other, self)

    def __mul__(self, other: Any) -> "Tensor":
        from .ops import mul

        return mul(self, other)

    def __rmul__(self, other: Any) -> "Tensor":
        from .ops import mul

        return mul(other, self)

    def __truediv__(self, other: float) -> "Tensor":
        from .ops import mul

        return mul(self, 1.0 / float(other))

    def __neg__(self) -> "Tensor":
        from .ops import mul

        return mul(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from .ops import matmul

        return matmul(self, other)

    def sum(self, axis: Optional[Union[int, tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        from .ops import sum as _sum

        return _sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[Union[int, tuple[int, ...]]] = None, keepdims: bool = False) -> "Tensor":
        from .ops import mean

        return mean(self, axis=axis, keepdims=keepdims)

    def square(self) -> "Tensor":
        from .ops import square

        return square(self)

    def reshape(self, *shape: int) -> "Tensor":
        from .ops import reshape

        return reshape(self, shape)

    def transpose(self, *axes: int) -> "Tensor":
        from .ops import transpose

        return transpose(self, axes)


def as_tensor(value: Any) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value, requires_grad=False)


class Function:
    """
    Base class for differentiable operations.

    ``forward`` receives the input arrays and returns the output array. ``backward``
    receives dL/d(output) and returns one array (or None) per input.
    """

    def __init__(self, *inputs: Tensor) -> None:
        self.inputs = inputs

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no forward pass")

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError(f"{type(self).__name__} has no backward pass")

    @classmethod
    def apply(cls, *inputs: Any, **kwargs: Any) -> Tensor:
        tensors = tuple(as_tensor(x) for x in inputs)
        fn = cls(*tensors)
        out_data = np.asarray(fn.forward(*(t.data for t in tensors), **kwargs), dtype=default_dtype())
        if not np.isfinite(out_data).all():
            shapes = ", ".join(str(t.shape) for t in tensors)
            raise NonFiniteError(f"{cls.__name__} produced non-finite values (input shapes {shapes})", op=cls.__name__)
        requires_grad = any(t.requires_grad for t in tensors)
        out = Tensor(out_data, requires_grad=requires_grad)
        tape = _active_tape.get()
        if tape is not None and requires_grad:
            tape.record(fn, out)
        return out

    @staticmethod
    def unbroadcast(grad: np.ndarray, to_shape: tuple[int, ...]) -> np.ndarray:
        """Sum out broadcast dimensions so ``grad`` matches ``to_shape``."""
        if grad.shape == to_shape:
            return grad
        while grad.ndim > len(to_shape):
            grad = grad.sum(axis=0)
        for dim, extent in enumerate(to_shape):
            if extent == 1 and grad.shape[dim] != 1:
                grad = grad.sum(axis=dim, keepdims=True)
        return grad


class GradTape:
    """Ordered record of executed ops. Active inside its ``with`` block for the current context only."""

    def __init__(self) -> None:
        self.records: list[tuple[Function, Tensor]] = []
        self._tokens: list[Any] = []

    def __enter__(self) -> "GradTape":
        self._tokens.append(_active_tape.set(self))
        return self

    def __exit__(self, *exc: Any) -> None:
        _active_tape.reset(self._tokens.pop())

    def record(self, fn: Function, out: Tensor) -> None:
        self.records.append((fn, out))

    def __len__(self) -> int:
        return len(self.records)


@contextmanager
def no_tape() -> Iterator[None]:
    """Run ops without recording, even inside an active tape."""
    token = _active_tape.set(None)
    try:
        yield
    finally:
        _active_tape.reset(token)


class Gradients:
    """Gradient lookup keyed by tensor identity. Tensors the loss never reached get zeros."""

    def __init__(self, by_id: dict[int, np.ndarray]) -> None:
        self._by_id = by_id

    def __getitem__(self, tensor: Tensor) -> np.ndarray:
        grad = self._by_id.get(id(tensor))
        if grad is None:
            return np.zeros_like(tensor.data)
        return grad

    def __contains__(self, tensor: Tensor) -> bool:
        return id(tensor) in self._by_id

    def named(self, params: Mapping[str, Tensor]) -> dict[str, np.ndarray]:
        return {name: self[p] for name, p in params.items()}


def backward(loss: Tensor, tape: GradTape) -> Gradients:
    """
    Propagate d(loss)/d(loss) = 1 back through ``tape``.

    Args:
        loss: a scalar tensor produced by ops recorded on ``tape``
        tape: the tape active while ``loss`` was computed

    Returns:
        a ``Gradients`` map; gradients from several uses of one tensor are summed
    """
    if loss.data.size != 1:
        raise TapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if len(tape) == 0:
        raise TapeError("backward called with an empty tape")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for fn, out in reversed(tape.records):
        grad = grads.pop(id(out), None)
        if grad is None:
            continue
        input_grads = fn.backward(grad)
        for inp, in_grad in zip(fn.inputs, input_grads):
            if in_grad is None or not inp.requires_grad:
                continue
            if not np.isfinite(in_grad).all():
                raise NonFiniteError(f"non-finite gradient flowing out of {type(fn).__name__}", op=type(fn).__name__)
            key = id(inp)
            if key in grads:
                grads[key] = grads[key] + in_grad
            else:
                grads[key] = np.asarray(in_grad, dtype=inp.data.dtype)
    return Gradients(grads)
