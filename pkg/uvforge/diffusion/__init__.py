from .schedule import NoiseSchedule, ddim_timesteps, forward_diffuse, make_schedule, schedule_for
from .modules import (
    Backbone,
    DetailExtractor,
    DetailSlot,
    Encoder,
    Network,
    ResBlock,
    SelfAttnExtractor,
    StructureAligner,
    conditioned_noise,
    make_extractor,
    predict_noise,
)
from .losses import (
    ConditionBatch,
    appearance_batch,
    denoising_loss,
    loss_appearance,
    loss_structure,
    structure_batch,
    to_nchw,
    to_signed,
    to_unit,
)
from .sampler import cfg_combine, ddim_sample
from .warmup import (
    BACKBONE_FILE,
    init_backbone,
    load_backbone,
    load_or_warmup_backbone,
    save_backbone,
    warmup_backbone,
)

__all__ = [
    "NoiseSchedule",
    "ddim_timesteps",
    "forward_diffuse",
    "make_schedule",
    "schedule_for",
    "Backbone",
    "DetailExtractor",
    "DetailSlot",
    "Encoder",
    "Network",
    "ResBlock",
    "SelfAttnExtractor",
    "StructureAligner",
    "conditioned_noise",
    "make_extractor",
    "predict_noise",
    "ConditionBatch",
    "appearance_batch",
    "denoising_loss",
    "loss_appearance",
    "loss_structure",
    "structure_batch",
    "to_nchw",
    "to_signed",
    "to_unit",
    "cfg_combine",
    "ddim_sample",
    "BACKBONE_FILE",
    "init_backbone",
    "load_backbone",
    "load_or_warmup_backbone",
    "save_backbone",
    "warmup_backbone",
]
