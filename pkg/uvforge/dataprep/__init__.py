from .masks import compose_masks, composite_occluders, occluder_mask, polygon_mask, skin_mask_wild
from .perturb import perturb_fit
from .prepare import TrainingSample, prepare_sample, proxy_texture, split_views

__all__ = [
    "compose_masks",
    "composite_occluders",
    "occluder_mask",
    "polygon_mask",
    "skin_mask_wild",
    "perturb_fit",
    "TrainingSample",
    "prepare_sample",
    "proxy_texture",
    "split_views",
]
