from .raster import FragmentBuffer, rasterize, render_texture, render_uv_position, triangle_coverage
from .sampling import bilinear, sample_pixels, sample_uv
from .uvmap import (
    UVPositionMap,
    atlas_mask,
    decode_positions,
    encode_positions,
    texel_assignment,
    uv_coordinate_texture,
    uv_position_map,
)
from .unwrap import front_facing, projected_texels, unwrap, uv_visibility
from .landmarks import LandmarkSet, gaussian_blob, project_landmarks

__all__ = [
    "FragmentBuffer",
    "rasterize",
    "render_texture",
    "render_uv_position",
    "triangle_coverage",
    "bilinear",
    "sample_pixels",
    "sample_uv",
    "UVPositionMap",
    "atlas_mask",
    "decode_positions",
    "encode_positions",
    "texel_assignment",
    "uv_coordinate_texture",
    "uv_position_map",
    "front_facing",
    "projected_texels",
    "unwrap",
    "uv_visibility",
    "LandmarkSet",
    "gaussian_blob",
    "project_landmarks",
]
