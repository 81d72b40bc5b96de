"""
Denoising losses of the two networks.

appearance: target I_w, detail slot T_w, control slot [I_uv, I_lm]
structure:  target T_m, detail slot I_m, control slot T_uv   (direction 2d_to_uv)
            target I_m, detail slot T_m, control slot I_uv   (direction uv_to_2d)

Targets are mapped from [0, 1] to [-1, 1]; conditions stay in [0, 1].
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..autodiff import Rng, Tensor
from ..dataprep import TrainingSample
from ..types.config import StructureDirection
from .modules import Network
from .schedule import NoiseSchedule, forward_diffuse


@dataclass(frozen=True)
class ConditionBatch:
    target: np.ndarray  # N×3×H×W in [-1, 1]
    detail: np.ndarray  # N×3×h×w in [0, 1]
    hint: np.ndarray  # N×k×H×W in [0, 1]

    @property
    def size(self) -> int:
        return self.target.shape[0]


def to_nchw(images: Sequence[np.ndarray]) -> np.ndarray:
    """Stack H×W×C (or H×W) arrays into an N×C×H×W float32 batch."""
    out = []
    for img in images:
        img = np.asarray(img, dtype=np.float32)
        if img.ndim == 2:
            img = img[..., None]
        out.append(np.transpose(img, (2, 0, 1)))
    return np.stack(out)


def to_signed(images: np.ndarray) -> np.ndarray:
    return images * np.float32(2.0) - np.float32(1.0)


def to_unit(images: np.ndarray) -> np.ndarray:
    return (images + np.float32(1.0)) * np.float32(0.5)


def appearance_batch(samples: Sequence[TrainingSample], landmarks: bool = True) -> ConditionBatch:
    lm = [s.I_lm if landmarks else np.zeros_like(s.I_lm) for s in samples]
    hint = np.concatenate([to_nchw([s.I_uv for s in samples]), to_nchw(lm)], axis=1)
    return ConditionBatch(
        target=to_signed(to_nchw([s.I_w for s in samples])),
        detail=to_nchw([s.T_w for s in samples]),
        hint=hint,
    )


def structure_batch(
    samples: Sequence[TrainingSample], direction: StructureDirection = StructureDirection.two_d_to_uv
) -> ConditionBatch:
    if StructureDirection(direction) is StructureDirection.uv_to_two_d:
        return ConditionBatch(
            target=to_signed(to_nchw([s.I_m for s in samples])),
            detail=to_nchw([s.T_m for s in samples]),
            hint=to_nchw([s.I_uv for s in samples]),
        )
    return ConditionBatch(
        target=to_signed(to_nchw([s.T_m for s in samples])),
        detail=to_nchw([s.I_m for s in samples]),
        hint=to_nchw([s.T_uv for s in samples]),
    )


def denoising_loss(
    batch: ConditionBatch,
    net: Network,
    rng: Rng,
    schedule: NoiseSchedule,
    cond_dropout: float = 0.1,
) -> Tensor:
    """
    mean((ε − ε̂(x_t, t, conditions))²) for one draw of t, ε and the dropout mask.

    Draw order from ``rng`` is fixed: timesteps, noise, keep mask. Dropped elements see
    neither detail tokens nor control residuals.
    """
    n = batch.size
    t = rng.integers(1, schedule.T + 1, size=n)
    eps = rng.normal(0.0, 1.0, batch.target.shape).astype(np.float32)
    keep = (rng.uniform(0.0, 1.0, size=n) >= cond_dropout).astype(np.float32)
    x_t = forward_diffuse(Tensor(batch.target), t, Tensor(eps), schedule)
    eps_hat = net(x_t, t, detail_images=batch.detail, hint=batch.hint, keep=keep)
    return (Tensor(eps) - eps_hat).square().mean()


def loss_appearance(
    samples: Sequence[TrainingSample],
    net: Network,
    rng: Rng,
    schedule: NoiseSchedule,
    *,
    cond_dropout: float = 0.1,
    landmarks: bool = True,
) -> Tensor:
    return denoising_loss(appearance_batch(samples, landmarks), net, rng, schedule, cond_dropout)


def loss_structure(
    samples: Sequence[TrainingSample],
    net: Network,
    rng: Rng,
    schedule: NoiseSchedule,
    *,
    cond_dropout: float = 0.1,
    direction: StructureDirection = StructureDirection.two_d_to_uv,
) -> Tensor:
    return denoising_loss(structure_batch(samples, direction), net, rng, schedule, cond_dropout)
