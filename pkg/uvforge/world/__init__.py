from .mesh import ATLAS_REGIONS, LANDMARK_COUNT, Mesh, atlas_topology, build_mesh, region_mask, texel_centers
from .sampling import sample_face, sample_scene
from .texture import synthesize_gt_texture

__all__ = [
    "ATLAS_REGIONS",
    "LANDMARK_COUNT",
    "Mesh",
    "atlas_topology",
    "build_mesh",
    "region_mask",
    "texel_centers",
    "sample_face",
    "sample_scene",
    "synthesize_gt_texture",
]
