from dataclasses import dataclass

import numpy as np

from ..autodiff.tensor import Tensor, as_tensor


@dataclass(frozen=True)
class NoiseSchedule:
    """
    Linear β schedule over timesteps 1..T. Arrays are indexed by t, with index 0 holding the
    clean state (β_0 = 0, ᾱ_0 = 1).
    """

    betas: np.ndarray  # T+1 float64
    alphas: np.ndarray  # T+1 float64
    alpha_bars: np.ndarray  # T+1 float64, strictly decreasing

    @property
    def T(self) -> int:
        return self.betas.shape[0] - 1

    def alpha_bar(self, t) -> np.ndarray:
        return self.alpha_bars[np.asarray(t)]

    def check(self, t) -> np.ndarray:
        t = np.asarray(t)
        if t.size and (t.min() < 1 or t.max() > self.T):
            raise ValueError(f"timestep out of range 1..{self.T}: {t.min()}..{t.max()}")
        return t


def make_schedule(T: int, beta_min: float = 1e-4, beta_max: float = 0.02) -> NoiseSchedule:
    """
    Linear β interpolation from ``beta_min`` (t=1) to ``beta_max`` (t=T).

    Raises:
        ValueError: unless 0 < beta_min <= beta_max < 1 and T >= 1
    """
    if T < 1:
        raise ValueError(f"need at least one timestep, got {T}")
    if not 0.0 < beta_min <= beta_max < 1.0:
        raise ValueError(f"need 0 < beta_min <= beta_max < 1, got {beta_min}, {beta_max}")
    betas = np.concatenate([[0.0], np.linspace(beta_min, beta_max, T)])
    alphas = 1.0 - betas
    alpha_bars = np.cumprod(alphas)
    for arr in (betas, alphas, alpha_bars):
        arr.setflags(write=False)
    return NoiseSchedule(betas=betas, alphas=alphas, alpha_bars=alpha_bars)


def _per_example(values: np.ndarray, ndim: int) -> np.ndarray:
    return values.reshape((-1,) + (1,) * (ndim - 1))


def forward_diffuse(x0, t, eps, schedule: NoiseSchedule):
    """
    x_t = √ᾱ_t·x0 + √(1−ᾱ_t)·ε, per batch element.

    ``t`` is a scalar or one timestep per leading-axis element. Tensors in give a Tensor
    out (recorded on an active tape); arrays give an array.
    """
    t = schedule.check(t)
    ab = schedule.alpha_bar(t)
    if isinstance(x0, Tensor) or isinstance(eps, Tensor):
        x0, eps = as_tensor(x0), as_tensor(eps)
        if x0.shape != eps.shape:
            raise ValueError(f"noise shape {eps.shape} does not match {x0.shape}")
        a = _per_example(np.sqrt(ab), x0.ndim) if ab.ndim else np.sqrt(ab)
        s = _per_example(np.sqrt(1.0 - ab), x0.ndim) if ab.ndim else np.sqrt(1.0 - ab)
        return x0 * a + eps * s
    x0, eps = np.asarray(x0), np.asarray(eps)
    if x0.shape != eps.shape:
        raise ValueError(f"noise shape {eps.shape} does not match {x0.shape}")
    if ab.ndim:
        ab = _per_example(ab, x0.ndim)
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def ddim_timesteps(T: int, steps: int) -> np.ndarray:
    """Uniform descending subsequence of 1..T starting at T; ``steps == T`` visits every step."""
    if not 1 <= steps <= T:
        raise ValueError(f"DDIM steps must lie in 1..{T}, got {steps}")
    return np.unique(np.round(np.linspace(T, 1, steps)).astype(np.int64))[::-1]


def schedule_for(config) -> NoiseSchedule:
    """Schedule described by a ``ModelConfig``."""
    return make_schedule(config.timesteps, config.beta_min, config.beta_max)
