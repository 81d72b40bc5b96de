from typing import Any, Optional, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..exceptions import ShapeError
from .tensor import Function, Tensor, as_tensor

Axis = Optional[Union[int, tuple[int, ...]]]


class Add(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a + b

    def backward(self, grad: np.ndarray):
        a, b = self.inputs
        return self.unbroadcast(grad, a.shape), self.unbroadcast(grad, b.shape)


class Sub(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a - b

    def backward(self, grad: np.ndarray):
        a, b = self.inputs
        return self.unbroadcast(grad, a.shape), self.unbroadcast(-grad, b.shape)


class Mul(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return a * b

    def backward(self, grad: np.ndarray):
        a, b = self.inputs
        return self.unbroadcast(grad * b.data, a.shape), self.unbroadcast(grad * a.data, b.shape)


class MatMul(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return np.matmul(a, b)

    def backward(self, grad: np.ndarray):
        a, b = self.inputs
        ga = np.matmul(grad, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), grad)
        return self.unbroadcast(ga, a.shape), self.unbroadcast(gb, b.shape)


class Sum(Function):
    def forward(self, a: np.ndarray, axis: Axis = None, keepdims: bool = False) -> np.ndarray:
        self.axis = axis
        self.keepdims = keepdims
        return a.sum(axis=axis, keepdims=keepdims)

    def backward(self, grad: np.ndarray):
        (a,) = self.inputs
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad, a.shape).copy(),)


class Mean(Function):
    def forward(self, a: np.ndarray, axis: Axis = None, keepdims: bool = False) -> np.ndarray:
        self.axis = axis
        self.keepdims = keepdims
        out = a.mean(axis=axis, keepdims=keepdims)
        self.count = a.size // max(1, out.size)
        return out

    def backward(self, grad: np.ndarray):
        (a,) = self.inputs
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad / self.count, a.shape).copy(),)


class Reshape(Function):
    def forward(self, a: np.ndarray, shape: tuple[int, ...] = ()) -> np.ndarray:
        return a.reshape(shape)

    def backward(self, grad: np.ndarray):
        return (grad.reshape(self.inputs[0].shape),)


class Transpose(Function):
    def forward(self, a: np.ndarray, axes: tuple[int, ...] = ()) -> np.ndarray:
        self.axes = axes
        return np.transpose(a, axes)

    def backward(self, grad: np.ndarray):
        return (np.transpose(grad, np.argsort(self.axes)),)


class Concat(Function):
    def forward(self, *arrays: np.ndarray, axis: int = 0) -> np.ndarray:
        self.axis = axis
        self.splits = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad: np.ndarray):
        return tuple(np.split(grad, self.splits, axis=self.axis))


class Square(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        return a * a

    def backward(self, grad: np.ndarray):
        return (2.0 * grad * self.inputs[0].data,)


class Sigmoid(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.out = expit(a)
        return self.out

    def backward(self, grad: np.ndarray):
        return (grad * self.out * (1.0 - self.out),)


class Relu(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        return np.maximum(a, 0)

    def backward(self, grad: np.ndarray):
        return (grad * (self.inputs[0].data > 0),)


class Silu(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.sig = expit(a)
        return a * self.sig

    def backward(self, grad: np.ndarray):
        a = self.inputs[0].data
        return (grad * (self.sig + a * self.sig * (1.0 - self.sig)),)


class Tanh(Function):
    def forward(self, a: np.ndarray) -> np.ndarray:
        self.out = np.tanh(a)
        return self.out

    def backward(self, grad: np.ndarray):
        return (grad * (1.0 - self.out * self.out),)


class Softmax(Function):
    def forward(self, a: np.ndarray, axis: int = -1) -> np.ndarray:
        self.axis = axis
        shifted = np.exp(a - a.max(axis=axis, keepdims=True))
        self.out = shifted / shifted.sum(axis=axis, keepdims=True)
        return self.out

    def backward(self, grad: np.ndarray):
        y = self.out
        return (y * (grad - (grad * y).sum(axis=self.axis, keepdims=True)),)


class AvgPool2d(Function):
    def forward(self, a: np.ndarray, k: int = 2) -> np.ndarray:
        self.k = k
        n, c, h, w = a.shape
        return a.reshape(n, c, h // k, k, w // k, k).mean(axis=(3, 5))

    def backward(self, grad: np.ndarray):
        k = self.k
        up = grad.repeat(k, axis=2).repeat(k, axis=3) / (k * k)
        return (up,)


class UpsampleNearest2d(Function):
    def forward(self, a: np.ndarray, factor: int = 2) -> np.ndarray:
        self.factor = factor
        return a.repeat(factor, axis=2).repeat(factor, axis=3)

    def backward(self, grad: np.ndarray):
        f = self.factor
        n, c, h, w = grad.shape
        return (grad.reshape(n, c, h // f, f, w // f, f).sum(axis=(3, 5)),)


class Conv2d(Function):
    """im2col convolution. Columns are ordered (channel, kernel row, kernel col)."""

    def forward(self, x: np.ndarray, w: np.ndarray, b: Optional[np.ndarray] = None, stride: int = 1, pad: int = 0):
        n, c, h, wd = x.shape
        o, _, kh, kw = w.shape
        self.stride, self.pad = stride, pad
        self.x_shape = x.shape
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
        self.padded_shape = xp.shape
        ho = (h + 2 * pad - kh) // stride + 1
        wo = (wd + 2 * pad - kw) // stride + 1
        self.out_hw = (ho, wo)
        windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :ho, :wo]
        self.cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * kh * kw)
        out = self.cols @ w.reshape(o, -1).T
        out = out.reshape(n, ho, wo, o).transpose(0, 3, 1, 2)
        if b is not None:
            out = out + b.reshape(1, o, 1, 1)
        return out

    def backward(self, grad: np.ndarray):
        w = self.inputs[1].data
        o, c, kh, kw = w.shape
        n = self.x_shape[0]
        ho, wo = self.out_hw
        s = self.stride
        g2 = grad.transpose(0, 2, 3, 1).reshape(-1, o)
        dw = (g2.T @ self.cols).reshape(w.shape)
        dcols = (g2 @ w.reshape(o, -1)).reshape(n, ho, wo, c, kh, kw)
        dxp = np.zeros(self.padded_shape, dtype=grad.dtype)
        for i in range(kh):
            for j in range(kw):
                dxp[:, :, i : i + s * ho : s, j : j + s * wo : s] += dcols[..., i, j].transpose(0, 3, 1, 2)
        p = self.pad
        dx = dxp[:, :, p : p + self.x_shape[2], p : p + self.x_shape[3]] if p else dxp
        if len(self.inputs) == 3:
            return dx, dw, grad.sum(axis=(0, 2, 3))
        return dx, dw


def add(a: Any, b: Any) -> Tensor:
    return Add.apply(a, b)


def sub(a: Any, b: Any) -> Tensor:
    return Sub.apply(a, b)


def mul(a: Any, b: Any) -> Tensor:
    return Mul.apply(a, b)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ShapeError("matmul inner dimensions differ", [a.shape, b.shape])
    return MatMul.apply(a, b)


def sum(a: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    return Sum.apply(a, axis=axis, keepdims=keepdims)


def mean(a: Tensor, axis: Axis = None, keepdims: bool = False) -> Tensor:
    return Mean.apply(a, axis=axis, keepdims=keepdims)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
        shape = shape[0]
    return Reshape.apply(a, shape=tuple(shape))


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
        axes = axes[0]
    return Transpose.apply(a, axes=tuple(axes))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


def square(a: Tensor) -> Tensor:
    return Square.apply(a)


def sigmoid(a: Tensor) -> Tensor:
    return Sigmoid.apply(a)


def relu(a: Tensor) -> Tensor:
    return Relu.apply(a)


def silu(a: Tensor) -> Tensor:
    return Silu.apply(a)


def tanh(a: Tensor) -> Tensor:
    return Tanh.apply(a)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    return Softmax.apply(a, axis=axis)


def avg_pool2d(a: Tensor, k: int = 2) -> Tensor:
    if a.shape[2] % k or a.shape[3] % k:
        raise ShapeError(f"avg_pool2d window {k} does not tile the input", [a.shape])
    return AvgPool2d.apply(a, k=k)


def upsample_nearest2d(a: Tensor, factor: int = 2) -> Tensor:
    return UpsampleNearest2d.apply(a, factor=factor)


def conv2d(input: Tensor, kernel: Tensor, stride: int = 1, pad: int = 0, bias: Optional[Tensor] = None) -> Tensor:
    """
    2D cross-correlation over an NCHW input.

    Args:
        input: N×C×H×W tensor
        kernel: O×C×kh×kw tensor
        stride: step between output samples
        pad: zero padding added on every spatial border
        bias: optional length-O tensor

    Returns:
        N×O×((H+2·pad−kh)//stride+1)×((W+2·pad−kw)//stride+1) tensor
    """
    input, kernel = as_tensor(input), as_tensor(kernel)
    if input.ndim != 4 or kernel.ndim != 4 or input.shape[1] != kernel.shape[1]:
        raise ShapeError("conv2d kernel does not match input", [input.shape, kernel.shape])
    if pad < 0 or stride < 1:
        raise ShapeError(f"conv2d needs pad >= 0 and stride >= 1 (pad={pad}, stride={stride})", [input.shape])
    if input.shape[2] + 2 * pad < kernel.shape[2] or input.shape[3] + 2 * pad < kernel.shape[3]:
        raise ShapeError("conv2d kernel larger than padded input", [input.shape, kernel.shape])
    if bias is not None:
        if bias.shape != (kernel.shape[0],):
            raise ShapeError("conv2d bias does not match kernel", [kernel.shape, bias.shape])
        return Conv2d.apply(input, kernel, bias, stride=stride, pad=pad)
    return Conv2d.apply(input, kernel, stride=stride, pad=pad)
