import logging
from typing import Callable, Optional

import numpy as np

from ..autodiff import no_tape
from ..exceptions import NonFiniteError, SamplerAbortedError
from ..runlog import EventLog
from .schedule import NoiseSchedule, ddim_timesteps

_logger = logging.getLogger(__name__)

# predict(x_t, t, conditional) -> ε̂, all arrays
Predictor = Callable[[np.ndarray, int, bool], np.ndarray]


def cfg_combine(eps_uncond: np.ndarray, eps_cond: np.ndarray, scale: float) -> np.ndarray:
    """ε_u + s·(ε_c − ε_u). Scales 1 and 0 return the respective input unchanged."""
    if eps_uncond.shape != eps_cond.shape:
        raise ValueError(f"guidance inputs differ in shape: {eps_uncond.shape} vs {eps_cond.shape}")
    if scale == 1.0:
        return eps_cond
    if scale == 0.0:
        return eps_uncond
    return eps_uncond + scale * (eps_cond - eps_uncond)


def ddim_sample(
    predict: Predictor,
    x_init: np.ndarray,
    schedule: NoiseSchedule,
    steps: int,
    scale: float = 1.0,
    *,
    log: Optional[EventLog] = None,
) -> np.ndarray:
    """
    Deterministic (η = 0) DDIM trajectory from ``x_init`` at t = T down to t = 0.

    Each step computes x̂0 = (x_t − √(1−ᾱ_t)·ε̂)/√ᾱ_t and moves to
    x_prev = √ᾱ_prev·x̂0 + √(1−ᾱ_prev)·ε̂, with ᾱ = 1 after the last step.

    Args:
        predict: noise predictor; called with ``conditional=False`` only when scale != 1
        x_init: starting noise
        schedule: the training schedule
        steps: number of denoising steps, 1..T
        scale: classifier-free guidance scale

    Returns:
        the final sample, same shape as ``x_init``

    Raises:
        SamplerAbortedError: when any intermediate is non-finite
    """
    timesteps = ddim_timesteps(schedule.T, steps)
    x = np.asarray(x_init, dtype=np.float64)
    with no_tape():
        for i, t in enumerate(timesteps):
            t = int(t)
            t_prev = int(timesteps[i + 1]) if i + 1 < len(timesteps) else 0
            try:
                eps_c = np.asarray(predict(x, t, True), dtype=np.float64)
                if scale != 1.0:
                    eps_u = np.asarray(predict(x, t, False), dtype=np.float64)
                    eps = cfg_combine(eps_u, eps_c, scale)
                else:
                    eps = eps_c
            except NonFiniteError as e:
                raise _abort(f"denoiser failed at step {i} (t={t}): {e}", i, t, log) from e
            ab, ab_prev = schedule.alpha_bars[t], schedule.alpha_bars[t_prev]
            x0_hat = (x - np.sqrt(1.0 - ab) * eps) / np.sqrt(ab)
            x = np.sqrt(ab_prev) * x0_hat + np.sqrt(1.0 - ab_prev) * eps
            if not np.isfinite(x).all():
                raise _abort(f"non-finite sample at step {i} (t={t})", i, t, log)
    return x


def _abort(message: str, step: int, t: int, log: Optional[EventLog]) -> SamplerAbortedError:
    _logger.error(message)
    if log is not None:
        log.emit("sampler_aborted", step=step, t=t, message=message)
    return SamplerAbortedError(message, step, t)
