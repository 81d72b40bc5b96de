from .recover import RecoveryRequest, RecoveryResult, compose_edit, interpolate, recover_uv, slerp_embeddings
from .train import (
    NetworkSpec,
    Role,
    TrainingRun,
    build_network,
    load_network,
    save_network,
    train_appearance,
    train_network,
    train_structure,
)
from .assemble import ARMS, DEFAULT_ARM, AssemblySpec, InferenceModel, assemble, resolve_arm

__all__ = [
    "RecoveryRequest",
    "RecoveryResult",
    "compose_edit",
    "interpolate",
    "recover_uv",
    "slerp_embeddings",
    "NetworkSpec",
    "Role",
    "TrainingRun",
    "build_network",
    "load_network",
    "save_network",
    "train_appearance",
    "train_network",
    "train_structure",
    "ARMS",
    "DEFAULT_ARM",
    "AssemblySpec",
    "InferenceModel",
    "assemble",
    "resolve_arm",
]
