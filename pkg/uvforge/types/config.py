from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .face import FitPerturbation


class AttentionKind(str, Enum):
    channel = "channel"
    self_ = "self"

    @classmethod
    def _missing_(cls, value):
        if isinstance(value, str):
            aliases = {"ch": cls.channel, "channel": cls.channel, "self": cls.self_, "self_attention": cls.self_}
            return aliases.get(value.lower())
        return None

    @property
    def tag(self) -> str:
        return "ch" if self is AttentionKind.channel else "self"


class StructureDirection(str, Enum):
    two_d_to_uv = "2d_to_uv"
    uv_to_two_d = "uv_to_2d"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CorpusConfig(_Section):
    seed: int = Field(default=0, ge=0, description="Root seed; every sample derives its own stream from it.")
    train_count: int = Field(default=2000, ge=0, description="Number of training samples.")
    eval_count: int = Field(default=200, ge=0, description="Number of evaluation samples.")
    image_size: int = Field(default=64, ge=8, description="Image side in pixels.")
    uv_size: int = Field(default=64, ge=8, description="Atlas side in texels.")
    pose_range: float = Field(default=45.0, ge=0, le=90, description="Yaw half-range in degrees.")
    occluder_prob: float = Field(default=0.3, ge=0, le=1, description="Probability a scene carries occluders.")
    detail_prob: float = Field(default=0.5, ge=0, le=1, description="Probability of each texture detail layer.")
    proxy_sigma: float = Field(default=4.0, gt=0, description="Blur of the proxy (3DMM-like) texture, texels.")
    landmark_jitter: float = Field(default=1.0, ge=0, description="Std of detected landmark noise, pixels.")
    perturbation: FitPerturbation = Field(default_factory=FitPerturbation)
    max_resample: int = Field(default=5, ge=0, description="Scene redraws before a rejected sample is skipped.")

    @model_validator(mode="after")
    def _nonempty(self) -> "CorpusConfig":
        if self.train_count + self.eval_count < 1:
            raise ValueError("corpus needs at least one sample")
        return self


class ModelConfig(_Section):
    base_channels: int = Field(default=32, ge=4, description="Width of the first backbone stage.")
    time_dim: int = Field(default=64, ge=4, description="Sinusoidal timestep embedding size.")
    embed_dim: int = Field(default=128, ge=4, description="Timestep MLP width.")
    token_dim: int = Field(default=64, ge=4, description="Detail token width.")
    token_grid: int = Field(default=8, ge=1, description="Tokens per view are token_grid².")
    attn_dim: int = Field(default=32, ge=4, description="Cross-attention key/query width.")
    heads: int = Field(default=4, ge=1, description="Heads of the self-attention extractor.")
    reduction: int = Field(default=4, ge=1, description="Channel attention bottleneck ratio.")
    gate_init: float = Field(default=0.5, description="Initial cross-attention gate before tanh.")
    timesteps: int = Field(default=1000, ge=1, description="Diffusion steps T.")
    beta_min: float = Field(default=1e-4, gt=0, lt=1)
    beta_max: float = Field(default=0.02, gt=0, lt=1)
    init_seed: int = Field(default=0, ge=0, description="Seed of the shared backbone initialisation.")


class WarmupConfig(_Section):
    steps: int = Field(default=500, ge=0, description="Unconditional backbone steps before freezing.")
    batch_size: int = Field(default=4, ge=1)
    lr: float = Field(default=2e-4, gt=0)
    seed: int = Field(default=0, ge=0)


class TrainConfig(_Section):
    steps: int = Field(default=2000, ge=1)
    batch_size: int = Field(default=4, ge=1)
    lr: float = Field(default=1e-4, gt=0)
    seed: int = Field(default=1, ge=0)
    cond_dropout: float = Field(
        default=0.1, ge=0, le=1, description="Per-element probability of dropping all conditions."
    )
    checkpoint_every: int = Field(default=250, ge=1)
    log_every: int = Field(default=10, ge=1)
    attention: AttentionKind = Field(default=AttentionKind.channel, description="Extractor kind of this network.")
    landmarks: bool = Field(default=True, description="Feed the landmark image to the appearance control branch.")
    direction: StructureDirection = Field(default=StructureDirection.two_d_to_uv)


def _structure_defaults() -> TrainConfig:
    return TrainConfig(seed=2, attention=AttentionKind.self_)


class SampleConfig(_Section):
    steps: int = Field(default=30, ge=1, description="DDIM steps.")
    guidance: float = Field(default=1.4, description="Classifier-free guidance scale.")
    seed: int = Field(default=11, ge=0)
    color_adjust: bool = Field(default=True, description="Match Lab statistics of the reference skin.")
    views: int = Field(default=1, ge=1, description="Partial views per recovery (vertical atlas bands).")


class EditLayer(_Section):
    sample_id: str = Field(description="Corpus sample whose unwrap supplies the region.")
    regions: list[str] = Field(description="Named atlas regions taken from that unwrap.")


class EditConfig(_Section):
    base: Optional[str] = Field(default=None, description="Corpus sample providing the base unwrap.")
    layers: list[EditLayer] = Field(default_factory=list)


class InterpConfig(_Section):
    a: Optional[str] = Field(default=None, description="First corpus sample.")
    b: Optional[str] = Field(default=None, description="Second corpus sample.")
    taus: list[float] = Field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])


class EvalConfig(_Section):
    split: str = Field(default="eval")
    limit: Optional[int] = Field(default=None, ge=1, description="Evaluate at most this many samples.")
    sheets: int = Field(default=8, ge=0, description="Rows written to the contact sheet.")


TABLE_ARMS = ["ch+self", "self+self", "self+ch", "ch+ch", "no-lm", "no-adj"]
EXTRA_ARMS = ["phi-a-only", "phi-s-only", "uv2d-phi-s"]


class AblateConfig(_Section):
    arms: list[str] = Field(default_factory=lambda: list(TABLE_ARMS))
    guidance_sweep: list[float] = Field(default_factory=lambda: [1.0, 1.4, 2.0, 3.0])


class RunConfig(_Section):
    corpus: CorpusConfig = Field(default_factory=CorpusConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    warmup: WarmupConfig = Field(default_factory=WarmupConfig)
    train_a: TrainConfig = Field(default_factory=TrainConfig)
    train_s: TrainConfig = Field(default_factory=_structure_defaults)
    sample: SampleConfig = Field(default_factory=SampleConfig)
    edit: EditConfig = Field(default_factory=EditConfig)
    interp: InterpConfig = Field(default_factory=InterpConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    ablate: AblateConfig = Field(default_factory=AblateConfig)
