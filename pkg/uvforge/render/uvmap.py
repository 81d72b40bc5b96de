from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..world.mesh import Mesh, atlas_topology
from .raster import pixel_bounds, triangle_coverage

# object-space box mapped onto [0, 1]³ by position maps
POSITION_BOX = 1.2


@dataclass(frozen=True)
class UVPositionMap:
    positions: np.ndarray  # S×S×3 float32 in [0, 1], 0 where invalid
    valid: np.ndarray  # S×S bool

    @property
    def size(self) -> int:
        return self.valid.shape[0]


def encode_positions(points: np.ndarray) -> np.ndarray:
    return np.clip((points + POSITION_BOX) / (2.0 * POSITION_BOX), 0.0, 1.0)


def decode_positions(encoded: np.ndarray) -> np.ndarray:
    return encoded * (2.0 * POSITION_BOX) - POSITION_BOX


@lru_cache(maxsize=8)
def texel_assignment(uv_size: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Which atlas triangle owns each texel centre, and where inside it.

    Topology is shared by every face, so this depends on ``uv_size`` only.

    Returns:
        (face_id, bary): S×S int64 with -1 outside the atlas, and S×S×3 weights
    """
    if uv_size < 8:
        raise ValueError(f"uv size must be at least 8, got {uv_size}")
    triangles, uv, _ = atlas_topology()
    corners = uv * uv_size
    face_id = np.full((uv_size, uv_size), -1, dtype=np.int64)
    bary = np.zeros((uv_size, uv_size, 3))
    for f, tri in enumerate(triangles):
        p0, p1, p2 = corners[tri[0]], corners[tri[1]], corners[tri[2]]
        bounds = pixel_bounds((p0[0], p1[0], p2[0]), (p0[1], p1[1], p2[1]), uv_size)
        if bounds is None:
            continue
        x_lo, x_hi, y_lo, y_hi = bounds
        ty, tx = np.mgrid[y_lo : y_hi + 1, x_lo : x_hi + 1].astype(np.float64) + 0.5
        inside, b0, b1, b2 = triangle_coverage(p0, p1, p2, tx, ty)
        window = (slice(y_lo, y_hi + 1), slice(x_lo, x_hi + 1))
        face_id[window][inside] = f
        bary[window][inside] = np.stack([b0, b1, b2], axis=-1)[inside]
    face_id.setflags(write=False)
    bary.setflags(write=False)
    return face_id, bary


def atlas_mask(uv_size: int) -> np.ndarray:
    """Texels whose centre lies inside some UV triangle."""
    return texel_assignment(uv_size)[0] >= 0


def surface_points(mesh: Mesh, uv_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Object-space surface point of every valid texel, as (valid mask, N×3 points)."""
    face_id, bary = texel_assignment(uv_size)
    valid = face_id >= 0
    corners = mesh.vertices[mesh.triangles[face_id[valid]]]
    return valid, np.einsum("nk,nkd->nd", bary[valid], corners)


def uv_position_map(mesh: Mesh, uv_size: int) -> UVPositionMap:
    """The complete UV position map of ``mesh``: every atlas texel, visible or not."""
    valid, points = surface_points(mesh, uv_size)
    positions = np.zeros((uv_size, uv_size, 3), dtype=np.float32)
    positions[valid] = encode_positions(points)
    return UVPositionMap(positions=positions, valid=valid)


def uv_coordinate_texture(uv_size: int) -> np.ndarray:
    """Texture holding (u, v, 1) of each texel centre; renders to the UV position image."""
    c = (np.arange(uv_size) + 0.5) / uv_size
    v, u = np.meshgrid(c, c, indexing="ij")
    return np.stack([u, v, np.ones_like(u)], axis=-1)
