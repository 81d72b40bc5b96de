from .face import (
    EXPRESSION_COUNT,
    SHAPE_COUNT,
    FaceParams,
    FitPerturbation,
    Occluder,
    OccluderKind,
    Scene,
)
from .config import (
    EXTRA_ARMS,
    TABLE_ARMS,
    AblateConfig,
    AttentionKind,
    CorpusConfig,
    EditConfig,
    EditLayer,
    EvalConfig,
    InterpConfig,
    ModelConfig,
    RunConfig,
    SampleConfig,
    StructureDirection,
    TrainConfig,
    WarmupConfig,
)
from .manifest import CorpusManifest, SampleRecord, Split

__all__ = [
    "EXPRESSION_COUNT",
    "SHAPE_COUNT",
    "FaceParams",
    "FitPerturbation",
    "Occluder",
    "OccluderKind",
    "Scene",
    "EXTRA_ARMS",
    "TABLE_ARMS",
    "AblateConfig",
    "AttentionKind",
    "CorpusConfig",
    "EditConfig",
    "EditLayer",
    "EvalConfig",
    "InterpConfig",
    "ModelConfig",
    "RunConfig",
    "SampleConfig",
    "StructureDirection",
    "TrainConfig",
    "WarmupConfig",
    "CorpusManifest",
    "SampleRecord",
    "Split",
]
