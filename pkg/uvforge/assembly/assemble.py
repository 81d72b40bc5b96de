"""
Cross-assembly: the detail extractor of one trained network and the structure aligner of
another, run on a shared frozen backbone.

    model = assemble(ARMS["ch+self"], "runs/m")
    result = model.recover(request)
"""

import logging
from os import PathLike
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..autodiff import Checkpoint, Tensor, load_checkpoint, no_tape
from ..diffusion import (
    Backbone,
    DetailExtractor,
    StructureAligner,
    conditioned_noise,
    predict_noise,
    schedule_for,
    to_nchw,
)
from ..diffusion.sampler import Predictor
from ..exceptions import CheckpointError, ConfigError, MissingFileError
from ..runlog import EventLog
from ..types.config import ModelConfig
from .recover import RecoveryRequest, RecoveryResult, recover_uv
from .train import load_network

_logger = logging.getLogger(__name__)


class AssemblySpec(BaseModel):
    """Which checkpoint supplies each part of the inference model."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    extractor: str = Field(description="Network whose detail extractor reads the partial unwraps.")
    control: str = Field(description="Network whose structure aligner reads the UV position map.")
    backbone: Optional[str] = Field(default=None, description="Network whose backbone denoises; defaults to control.")
    color_adjust: bool = Field(default=True, description="Match Lab statistics of the reference skin.")

    @property
    def backbone_source(self) -> str:
        return self.backbone or self.control

    def checkpoints(self) -> list[str]:
        return list(dict.fromkeys([self.extractor, self.control, self.backbone_source]))


ARMS: dict[str, AssemblySpec] = {
    "ch+self": AssemblySpec(extractor="phi_a_ch", control="phi_s_self"),
    "self+self": AssemblySpec(extractor="phi_a_self", control="phi_s_self"),
    "self+ch": AssemblySpec(extractor="phi_a_self", control="phi_s_ch"),
    "ch+ch": AssemblySpec(extractor="phi_a_ch", control="phi_s_ch"),
    "no-lm": AssemblySpec(extractor="phi_a_ch_nolm", control="phi_s_self"),
    "no-adj": AssemblySpec(extractor="phi_a_ch", control="phi_s_self", color_adjust=False),
    "phi-a-only": AssemblySpec(extractor="phi_a_ch", control="phi_a_ch"),
    "phi-s-only": AssemblySpec(extractor="phi_s_self", control="phi_s_self"),
    "uv2d-phi-s": AssemblySpec(extractor="phi_a_ch", control="phi_s_self_uv2d"),
}
DEFAULT_ARM = "ch+self"


def resolve_arm(name: str) -> AssemblySpec:
    try:
        return ARMS[name]
    except KeyError:
        raise ConfigError(f"unknown arm {name!r}, expected one of {sorted(ARMS)}", "ablate.arms") from None


class InferenceModel:
    """
    Immutable assembled model. Safe to share between concurrent recovery requests: nothing
    here is mutated after construction and sampling never records a tape.
    """

    def __init__(
        self,
        backbone: Backbone,
        extractor: DetailExtractor,
        aligner: StructureAligner,
        model: ModelConfig,
        spec: AssemblySpec,
    ) -> None:
        self.backbone = backbone
        self.extractor = extractor
        self.aligner = aligner
        self.model = model
        self.spec = spec
        self.schedule = schedule_for(model)

    @property
    def color_adjust(self) -> bool:
        return self.spec.color_adjust

    def tokens(self, views: Sequence[np.ndarray]) -> Tensor:
        """One token sequence for all partial views of a face (1×(K·L)×D)."""
        with no_tape():
            return self.extractor(Tensor(to_nchw(views)), views=len(views))

    def noise(
        self,
        x_t: Tensor,
        t: np.ndarray,
        detail_images: Optional[np.ndarray] = None,
        hint: Optional[np.ndarray] = None,
        views: int = 1,
    ) -> Tensor:
        return conditioned_noise(self.backbone, self.extractor, self.aligner, x_t, t, detail_images, hint, views=views)

    def predictor(self, tokens: Tensor, hint: np.ndarray) -> Predictor:
        def predict(x: np.ndarray, t: int, conditional: bool) -> np.ndarray:
            x_t = Tensor(x)
            steps = np.full(x.shape[0], t, dtype=np.int64)
            if conditional:
                eps = conditioned_noise(
                    self.backbone, self.extractor, self.aligner, x_t, steps, hint=hint, tokens=tokens
                )
            else:
                eps = predict_noise(self.backbone, x_t, steps)
            return eps.data

        return predict

    def recover(self, request: RecoveryRequest, *, log: Optional[EventLog] = None) -> RecoveryResult:
        return recover_uv(self, request, log=log)


def _load(name: str, checkpoints: Union[PathLike, Mapping[str, Checkpoint]]) -> Checkpoint:
    if isinstance(checkpoints, Mapping):
        if name not in checkpoints:
            raise MissingFileError(f"no checkpoint named {name}", name)
        return checkpoints[name]
    return load_checkpoint(Path(checkpoints) / f"{name}.ckpt")


def assemble(spec: AssemblySpec, checkpoints: Union[PathLike, Mapping[str, Checkpoint]]) -> InferenceModel:
    """
    Wire the extractor, aligner and backbone named by ``spec``.

    Args:
        spec: which network supplies each part
        checkpoints: a model directory holding ``<name>.ckpt`` files, or loaded checkpoints by name

    Raises:
        MissingFileError: when a referenced checkpoint does not exist
        CheckpointError: when the parts do not fit the backbone's architecture; lists the tensors
    """
    loaded = {name: _load(name, checkpoints) for name in spec.checkpoints()}
    backbone_ckpt = loaded[spec.backbone_source]
    model = ModelConfig.model_validate(backbone_ckpt.metadata.get("model", {}))
    parts = {}
    for role, name in (("backbone", spec.backbone_source), ("extractor", spec.extractor), ("aligner", spec.control)):
        try:
            net, _ = load_network(loaded[name], model)
        except CheckpointError as e:
            raise CheckpointError(f"{name} does not fit the {spec.backbone_source} backbone", e.offending) from e
        parts[role] = getattr(net, role)
    _logger.info(f"Assembled extractor={spec.extractor} control={spec.control} backbone={spec.backbone_source}")
    return InferenceModel(parts["backbone"], parts["extractor"], parts["aligner"], model, spec)
