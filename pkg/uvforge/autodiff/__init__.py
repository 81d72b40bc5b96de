from .tensor import (
    Function,
    GradTape,
    Gradients,
    Tensor,
    as_tensor,
    backward,
    default_dtype,
    float64_precision,
    no_tape,
)
from .ops import (
    avg_pool2d,
    concat,
    conv2d,
    matmul,
    mean,
    relu,
    reshape,
    sigmoid,
    silu,
    softmax,
    square,
    tanh,
    transpose,
    upsample_nearest2d,
)
from .layers import (
    ChannelAttention,
    Conv,
    CrossAttention,
    Linear,
    Module,
    SpatialSelfAttention,
    channel_attention,
    spatial_self_attention,
    timestep_embedding,
    zero_module,
)
from .optim import AdamState, adam_step, train_step
from .rng import Rng
from .checkpoint import CHECKPOINT_MAGIC, Checkpoint, load_checkpoint, save_checkpoint
from .gradcheck import gradcheck

__all__ = [
    "Function",
    "GradTape",
    "Gradients",
    "Tensor",
    "as_tensor",
    "backward",
    "default_dtype",
    "float64_precision",
    "no_tape",
    "avg_pool2d",
    "concat",
    "conv2d",
    "matmul",
    "mean",
    "relu",
    "reshape",
    "sigmoid",
    "silu",
    "softmax",
    "square",
    "tanh",
    "transpose",
    "upsample_nearest2d",
    "ChannelAttention",
    "Conv",
    "CrossAttention",
    "Linear",
    "Module",
    "SpatialSelfAttention",
    "channel_attention",
    "spatial_self_attention",
    "timestep_embedding",
    "zero_module",
    "AdamState",
    "adam_step",
    "train_step",
    "Rng",
    "CHECKPOINT_MAGIC",
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "gradcheck",
]
