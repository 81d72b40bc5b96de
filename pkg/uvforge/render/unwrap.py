"""
From the image back into the atlas.

A texel is visible when the surface point it stands for faces the camera, lands inside the
image, and no other front-facing surface covers that spot more than ``DEPTH_EPS`` nearer.
Unwrapping gathers one bilinear image sample per visible texel.
"""

from typing import Optional

import numpy as np

from ..types.face import Scene
from ..world.mesh import Mesh
from .raster import DEGENERATE_AREA, signed_area
from .sampling import sample_pixels
from .uvmap import surface_points, texel_assignment

DEPTH_EPS = 1e-3
SUPPORT_EPS = 1e-6


def front_facing(projected: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Boolean per triangle; degenerate projections count as not front-facing."""
    p0, p1, p2 = (projected[triangles[:, k], :2] for k in range(3))
    area = (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1]) - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0])
    return area <= -DEGENERATE_AREA


def projected_texels(mesh: Mesh, scene: Scene, uv_size: int, size: Optional[int] = None):
    """
    Image-space position of every valid texel.

    Returns:
        (valid, face ids, points): S×S mask, N owning triangles, N×3 (x, y, depth) in pixels
    """
    valid, points = surface_points(mesh, uv_size)
    face_id = texel_assignment(uv_size)[0][valid]
    return valid, face_id, scene.project(points, size)


def _occluded(points: np.ndarray, projected: np.ndarray, triangles: np.ndarray, front: np.ndarray) -> np.ndarray:
    occluded = np.zeros(points.shape[0], dtype=bool)
    for f in np.flatnonzero(front):
        p0, p1, p2 = projected[triangles[f]]
        lo = np.minimum(np.minimum(p0, p1), p2)
        hi = np.maximum(np.maximum(p0, p1), p2)
        near = (points[:, 0] >= lo[0]) & (points[:, 0] <= hi[0]) & (points[:, 1] >= lo[1]) & (points[:, 1] <= hi[1])
        near &= points[:, 2] > lo[2] + DEPTH_EPS
        idx = np.flatnonzero(near)
        if idx.size == 0:
            continue
        px, py = points[idx, 0], points[idx, 1]
        area = signed_area(p0, p1, p2)
        b0 = ((p2[0] - p1[0]) * (py - p1[1]) - (p2[1] - p1[1]) * (px - p1[0])) / area
        b1 = ((p0[0] - p2[0]) * (py - p2[1]) - (p0[1] - p2[1]) * (px - p2[0])) / area
        b2 = 1.0 - b0 - b1
        inside = (b0 >= 0) & (b1 >= 0) & (b2 >= 0)
        z = b0 * p0[2] + b1 * p1[2] + b2 * p2[2]
        occluded[idx[inside & (z < points[idx, 2] - DEPTH_EPS)]] = True
    return occluded


def uv_visibility(mesh: Mesh, scene: Scene, uv_size: int, size: Optional[int] = None) -> np.ndarray:
    """
    S×S mask of texels the camera sees.

    Args:
        mesh: the (fitted) face
        scene: the camera
        uv_size: atlas side in texels
        size: image side, defaults to ``scene.image_size``

    Returns:
        boolean mask; texels outside the atlas are never visible
    """
    size = size or scene.image_size
    projected = scene.project(mesh.vertices, size)
    front = front_facing(projected, mesh.triangles)
    valid, face_id, points = projected_texels(mesh, scene, uv_size, size)
    in_image = (points[:, 0] >= 0) & (points[:, 0] < size) & (points[:, 1] >= 0) & (points[:, 1] < size)
    seen = front[face_id] & in_image
    seen[seen] = ~_occluded(points[seen], projected, mesh.triangles, front)
    visible = np.zeros((uv_size, uv_size), dtype=bool)
    visible[valid] = seen
    return visible


def unwrap(
    image: np.ndarray,
    mesh: Mesh,
    scene: Scene,
    uv_size: int,
    image_mask: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Gather a partial UV texture from an image.

    Every visible texel takes the bilinear image sample at its projected pixel. A texel
    enters the mask only when all pixels that sample touches are inside ``image_mask``
    (the nonzero pixels when no mask is given).

    Args:
        image: H×W×C image rendered (or photographed) under ``mesh`` and ``scene``
        mesh: the face used for unwrapping, usually the fitted one
        scene: its camera
        uv_size: atlas side in texels
        image_mask: H×W boolean support of usable pixels

    Returns:
        (T_w, M_T): the S×S×C texture, zero outside the mask, and the S×S mask

    Example:
         .. code-block:: python

            from uvforge.render import unwrap

            partial, mask = unwrap(masked_image, fitted_mesh, scene, 64, image_mask=skin)
    """
    size = image.shape[0]
    if image.ndim == 2:
        image = image[..., None]
    if image_mask is None:
        image_mask = np.any(image != 0, axis=-1)
    visible = uv_visibility(mesh, scene, uv_size, size)
    valid, _, points = projected_texels(mesh, scene, uv_size, size)
    grid = np.zeros((uv_size, uv_size, 2))
    grid[valid] = points[:, :2]
    xs, ys = grid[visible, 0], grid[visible, 1]
    support = sample_pixels(image_mask.astype(np.float64), xs, ys) >= 1.0 - SUPPORT_EPS
    mask = np.zeros((uv_size, uv_size), dtype=bool)
    mask[visible] = support
    texture = np.zeros((uv_size, uv_size, image.shape[2]), dtype=np.float32)
    texture[mask] = sample_pixels(image, grid[mask, 0], grid[mask, 1])
    return texture, mask
