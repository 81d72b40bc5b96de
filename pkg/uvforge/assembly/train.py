"""
Training of the appearance network φ_a and the structure network φ_s.

Both train only their condition modules (extractor and aligner) against the frozen,
warmed-up backbone found in, or written to, ``<model_dir>/backbone.ckpt``. Checkpoints are
named after what they contain:

    phi_a_ch, phi_a_self, phi_a_ch_nolm           appearance, by extractor attention
    phi_s_self, phi_s_ch, phi_s_self_uv2d         structure, by extractor attention
"""

import logging
import sys
from dataclasses import dataclass, field
from enum import Enum
from os import PathLike
from pathlib import Path
from typing import Optional, Sequence, Union

from pydantic import BaseModel, ConfigDict, Field

from ..autodiff import AdamState, Checkpoint, Rng, load_checkpoint, save_checkpoint, train_step
from ..corpus.store import SampleStore, draw_batch
from ..dataprep import TrainingSample
from ..diffusion import (
    Backbone,
    Network,
    StructureAligner,
    appearance_batch,
    denoising_loss,
    init_backbone,
    load_or_warmup_backbone,
    make_extractor,
    schedule_for,
    structure_batch,
)
from ..exceptions import CheckpointError, NonFiniteError, TrainingHaltedError
from ..runlog import EventLog
from ..types.config import AttentionKind, ModelConfig, RunConfig, StructureDirection, TrainConfig
from ..types.manifest import CorpusManifest, Split

_logger = logging.getLogger(__name__)
_logger.setLevel(logging.INFO)
_logger.addHandler(logging.StreamHandler(sys.stderr))

NETWORK_MODULES = ["backbone", "extractor", "aligner"]


class Role(str, Enum):
    appearance = "appearance"
    structure = "structure"


class NetworkSpec(BaseModel):
    """What a trained network is; stored in its checkpoint metadata."""

    model_config = ConfigDict(extra="forbid")

    role: Role
    attention: AttentionKind = Field(description="Attention inside the detail extractor.")
    landmarks: bool = Field(default=True, description="Appearance only: landmark channel fed to the aligner.")
    direction: StructureDirection = Field(default=StructureDirection.two_d_to_uv, description="Structure only.")

    @property
    def hint_channels(self) -> int:
        # I_uv plus I_lm for appearance; T_uv (or I_uv) for structure
        return 4 if self.role is Role.appearance else 3

    @property
    def name(self) -> str:
        if self.role is Role.appearance:
            return f"phi_a_{self.attention.tag}" + ("" if self.landmarks else "_nolm")
        suffix = "_uv2d" if self.direction is StructureDirection.uv_to_two_d else ""
        return f"phi_s_{self.attention.tag}{suffix}"

    @classmethod
    def appearance(cls, config: TrainConfig) -> "NetworkSpec":
        return cls(role=Role.appearance, attention=config.attention, landmarks=config.landmarks)

    @classmethod
    def structure(cls, config: TrainConfig) -> "NetworkSpec":
        return cls(role=Role.structure, attention=config.attention, direction=config.direction)


@dataclass
class TrainingRun:
    spec: NetworkSpec
    checkpoint: Path
    losses: list[float] = field(default_factory=list)


def build_network(backbone: Backbone, spec: NetworkSpec, model: ModelConfig) -> Network:
    """Fresh extractor and aligner around ``backbone``; initialisation depends only on the network name."""
    rng = Rng(model.init_seed, "network", spec.name)
    extractor = make_extractor(spec.attention, model, rng.child("extractor"))
    aligner = StructureAligner.from_backbone(backbone, spec.hint_channels, model, rng.child("aligner"))
    return Network(backbone, extractor, aligner)


def save_network(path: PathLike, net: Network, spec: NetworkSpec, model: ModelConfig, step: int) -> Path:
    metadata = {
        "modules": NETWORK_MODULES,
        "name": spec.name,
        "network": spec.model_dump(mode="json"),
        "model": model.model_dump(mode="json"),
        "step": step,
    }
    return save_checkpoint(path, net.state(), metadata)


def network_spec(ckpt: Checkpoint) -> NetworkSpec:
    if "network" not in ckpt.metadata:
        raise CheckpointError("checkpoint does not hold a trained network", ["network"])
    return NetworkSpec.model_validate(ckpt.metadata["network"])


def load_network(
    source: Union[PathLike, Checkpoint], model: Optional[ModelConfig] = None
) -> tuple[Network, NetworkSpec]:
    """
    Rebuild a network from its checkpoint.

    Args:
        source: checkpoint path or an already loaded checkpoint
        model: architecture to build; defaults to the one stored in the checkpoint

    Raises:
        CheckpointError: when stored tensors do not fit the architecture (names every offender)
    """
    ckpt = source if isinstance(source, Checkpoint) else load_checkpoint(source)
    spec = network_spec(ckpt)
    model = model or ModelConfig.model_validate(ckpt.metadata.get("model", {}))
    net = build_network(init_backbone(model), spec, model)
    net.load_state(ckpt.arrays)
    net.backbone.freeze()
    return net, spec


def _batch(samples: Sequence[TrainingSample], spec: NetworkSpec):
    if spec.role is Role.appearance:
        return appearance_batch(samples, spec.landmarks)
    return structure_batch(samples, spec.direction)


def train_network(
    samples: Sequence[TrainingSample],
    spec: NetworkSpec,
    model: ModelConfig,
    config: TrainConfig,
    out_dir: PathLike,
    backbone: Backbone,
    *,
    log: Optional[EventLog] = None,
) -> TrainingRun:
    """
    Optimise the extractor and aligner of one network; the backbone stays frozen.

    Checkpoints go to ``<out_dir>/<name>.ckpt`` every ``checkpoint_every`` steps and after the
    last step. A non-finite loss or gradient stops training and leaves the last good
    checkpoint in place.

    Raises:
        TrainingHaltedError: carrying the failing step and the last good checkpoint (or None)
    """
    log = log or EventLog()
    out_dir = Path(out_dir)
    net = build_network(backbone.freeze(), spec, model)
    schedule = schedule_for(model)
    params = net.trainable()
    state = AdamState(config.lr)
    rng = Rng(config.seed, "train", spec.name)
    path = out_dir / f"{spec.name}.ckpt"
    run = TrainingRun(spec=spec, checkpoint=path)
    last_good: Optional[Path] = None

    _logger.info(f"Training {spec.name}: {len(params)} tensors, {len(samples)} samples, {config.steps} steps")
    log.emit("train_start", network=spec.name, steps=config.steps, parameters=sum(p.size for p in params.values()))
    for step in range(1, config.steps + 1):
        batch = _batch(draw_batch(samples, rng.child("batch", step), config.batch_size), spec)
        noise_rng = rng.child("noise", step)
        try:
            loss = train_step(
                lambda: denoising_loss(batch, net, noise_rng, schedule, config.cond_dropout), params, state
            )
        except NonFiniteError as e:
            log.emit("train_halted", network=spec.name, step=step, checkpoint=last_good, message=str(e))
            _logger.error(f"{spec.name} halted at step {step}: {e}")
            raise TrainingHaltedError(f"{spec.name} diverged at step {step}: {e}", step, last_good) from e
        run.losses.append(loss)
        if step == 1 or step % config.log_every == 0:
            log.emit("train_step", network=spec.name, step=step, loss=loss, lr=config.lr)
        if step % config.checkpoint_every == 0 or step == config.steps:
            last_good = save_network(path, net, spec, model, step)
            log.emit("checkpoint", network=spec.name, step=step, path=path)
    return run


def training_samples(corpus: Union[CorpusManifest, Sequence[TrainingSample]]) -> Sequence[TrainingSample]:
    if isinstance(corpus, CorpusManifest):
        return SampleStore(corpus, Split.train)
    return corpus


def train_appearance(
    corpus: Union[CorpusManifest, Sequence[TrainingSample]],
    config: RunConfig,
    out_dir: PathLike,
    *,
    backbone: Optional[Backbone] = None,
    log: Optional[EventLog] = None,
) -> TrainingRun:
    """φ_a: (T_w → detail slot, [I_uv, I_lm] → control slot) → I_w."""
    samples = training_samples(corpus)
    if backbone is None:
        backbone = load_or_warmup_backbone(out_dir, samples, config.model, config.warmup, log=log)
    return train_network(
        samples, NetworkSpec.appearance(config.train_a), config.model, config.train_a, out_dir, backbone, log=log
    )


def train_structure(
    corpus: Union[CorpusManifest, Sequence[TrainingSample]],
    config: RunConfig,
    out_dir: PathLike,
    *,
    backbone: Optional[Backbone] = None,
    log: Optional[EventLog] = None,
) -> TrainingRun:
    """φ_s: (I_m → detail slot, T_uv → control slot) → T_m, or the reverse direction."""
    samples = training_samples(corpus)
    if backbone is None:
        backbone = load_or_warmup_backbone(out_dir, samples, config.model, config.warmup, log=log)
    return train_network(
        samples, NetworkSpec.structure(config.train_s), config.model, config.train_s, out_dir, backbone, log=log
    )
