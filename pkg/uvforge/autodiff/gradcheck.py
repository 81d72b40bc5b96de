from typing import Callable, Sequence

import numpy as np

from .tensor import GradTape, Tensor, backward, float64_precision

_REL_FLOOR = 1e-3


def gradcheck(fn: Callable[..., Tensor], inputs: Sequence[np.ndarray], h: float = 1e-3) -> float:
    """
    Compare analytic gradients of a scalar-valued ``fn`` with central differences.

    Everything runs in double precision. The error of one element is
    ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-3)``.

    Returns:
        the largest error over all elements of all inputs
    """
    worst = 0.0
    with float64_precision():
        tensors = [Tensor(np.array(x, dtype=np.float64), requires_grad=True) for x in inputs]
        with GradTape() as tape:
            out = fn(*tensors)
        grads = backward(out, tape)
        for t in tensors:
            analytic = grads[t].reshape(-1)
            flat = t.data.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                f_plus = fn(*tensors).item()
                flat[i] = orig - h
                f_minus = fn(*tensors).item()
                flat[i] = orig
                numeric = (f_plus - f_minus) / (2.0 * h)
                denom = max(abs(analytic[i]), abs(numeric), _REL_FLOOR)
                worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst
