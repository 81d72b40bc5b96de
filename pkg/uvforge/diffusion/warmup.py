"""
Unconditional warm-up of the shared backbone.

Both networks train their condition modules against one frozen backbone, so the extractor
of one and the aligner of the other address the same features when assembled. The backbone
learns to denoise images (I_w) on odd steps and textures (T_m) on even steps.
"""

import logging
import sys
from os import PathLike
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..autodiff import AdamState, Rng, Tensor, load_checkpoint, save_checkpoint, train_step
from ..corpus.store import draw_batch
from ..dataprep import TrainingSample
from ..exceptions import CheckpointError, NonFiniteError, TrainingHaltedError
from ..runlog import EventLog
from ..types.config import ModelConfig, WarmupConfig
from .losses import to_nchw, to_signed
from .modules import Backbone, predict_noise
from .schedule import NoiseSchedule, forward_diffuse, schedule_for

_logger = logging.getLogger(__name__)
_logger.setLevel(logging.INFO)
_logger.addHandler(logging.StreamHandler(sys.stderr))

BACKBONE_FILE = "backbone.ckpt"
_LOG_EVERY = 10


def init_backbone(config: ModelConfig) -> Backbone:
    return Backbone(config, Rng(config.init_seed, "backbone"))


def unconditional_loss(backbone: Backbone, x0: np.ndarray, rng: Rng, schedule: NoiseSchedule) -> Tensor:
    n = x0.shape[0]
    t = rng.integers(1, schedule.T + 1, size=n)
    eps = rng.normal(0.0, 1.0, x0.shape).astype(np.float32)
    x_t = forward_diffuse(Tensor(x0), t, Tensor(eps), schedule)
    return (Tensor(eps) - predict_noise(backbone, x_t, t)).square().mean()


def warmup_backbone(
    samples: Sequence[TrainingSample],
    model: ModelConfig,
    config: WarmupConfig,
    *,
    log: Optional[EventLog] = None,
) -> Backbone:
    """
    Train a freshly initialised backbone without conditions, then freeze it.

    Raises:
        TrainingHaltedError: on a non-finite loss or gradient
    """
    log = log or EventLog()
    backbone = init_backbone(model)
    schedule = schedule_for(model)
    rng = Rng(config.seed, "warmup")
    params = backbone.trainable()
    state = AdamState(config.lr)
    _logger.info(f"Warming up backbone ({backbone.num_parameters()} parameters) for {config.steps} steps")
    for step in range(1, config.steps + 1):
        batch = draw_batch(samples, rng.child("batch", step), config.batch_size)
        targets = [s.I_w for s in batch] if step % 2 else [s.T_m for s in batch]
        x0 = to_signed(to_nchw(targets))
        try:
            noise_rng = rng.child("noise", step)
            loss = train_step(lambda: unconditional_loss(backbone, x0, noise_rng, schedule), params, state)
        except NonFiniteError as e:
            log.emit("train_halted", phase="warmup", step=step, message=str(e))
            raise TrainingHaltedError(f"backbone warm-up diverged at step {step}: {e}", step, None) from e
        if step % _LOG_EVERY == 0 or step == config.steps:
            log.emit("warmup_step", step=step, loss=loss, lr=config.lr)
    return backbone.freeze()


def save_backbone(path: PathLike, backbone: Backbone, model: ModelConfig, steps: int) -> Path:
    metadata = {"modules": ["backbone"], "role": "backbone", "model": model.model_dump(mode="json"), "step": steps}
    return save_checkpoint(path, {f"backbone.{k}": v for k, v in backbone.state().items()}, metadata)


def load_backbone(path: PathLike, model: ModelConfig) -> Backbone:
    """Read a frozen backbone; raises CheckpointError when it was built with another architecture."""
    ckpt = load_checkpoint(path)
    stored = ckpt.metadata.get("model")
    if stored is not None and ModelConfig.model_validate(stored) != model:
        raise CheckpointError(f"{path} was trained with a different model config", ["model"])
    return init_backbone(model).load_state(ckpt.section("backbone")).freeze()


def load_or_warmup_backbone(
    model_dir: PathLike,
    samples: Sequence[TrainingSample],
    model: ModelConfig,
    config: WarmupConfig,
    *,
    log: Optional[EventLog] = None,
) -> Backbone:
    """Reuse ``<model_dir>/backbone.ckpt`` when present, otherwise warm up and write it."""
    path = Path(model_dir) / BACKBONE_FILE
    if path.exists():
        _logger.info(f"Reusing frozen backbone {path}")
        return load_backbone(path, model)
    backbone = warmup_backbone(samples, model, config, log=log)
    save_backbone(path, backbone, model, config.steps)
    return backbone
