"""
Z-buffered triangle rasterization.

Conventions shared by every renderer in this package:

- pixel (row i, column j) has its centre at (x, y) = (j + 0.5, i + 0.5), y pointing down;
- a pixel belongs to a triangle when its centre is strictly inside, or lies on a top or left
  edge (so a shared edge is drawn exactly once);
- a triangle is front-facing when its projected winding is clockwise in pixel coordinates
  (counter-clockwise seen from outside the head, y up);
- depth grows away from the camera and the nearer fragment wins only with a strictly
  smaller depth, triangles taken in increasing id, so the lower id keeps a tie.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..types.face import Scene
from ..world.mesh import Mesh
from .sampling import sample_uv

_logger = logging.getLogger(__name__)

DEGENERATE_AREA = 1e-12


@dataclass(frozen=True)
class FragmentBuffer:
    face_id: np.ndarray  # H×W int64, -1 where empty
    bary: np.ndarray  # H×W×3 float64, weights of the triangle's vertices in mesh order
    depth: np.ndarray  # H×W float64, inf where empty
    uv: np.ndarray  # H×W×2 float64
    light_gain: np.ndarray  # 3
    degenerate: int = 0

    @property
    def covered(self) -> np.ndarray:
        return self.face_id >= 0

    @property
    def size(self) -> int:
        return self.face_id.shape[0]


def _edge(a: Sequence[float], b: Sequence[float], px, py):
    return (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0])


def signed_area(p0: Sequence[float], p1: Sequence[float], p2: Sequence[float]) -> float:
    """Twice the signed area; negative for a front-facing projected triangle."""
    return float(_edge(p0, p1, p2[0], p2[1]))


def _owns(a: Sequence[float], b: Sequence[float], e: np.ndarray) -> np.ndarray:
    dx, dy = b[0] - a[0], b[1] - a[1]
    if dy < 0 or (dy == 0 and dx > 0):
        return e >= 0
    return e > 0


def triangle_coverage(p0, p1, p2, px: np.ndarray, py: np.ndarray):
    """
    Top-left-rule coverage of sample points by one 2D triangle of either winding.

    Returns:
        (inside, b0, b1, b2): a boolean mask and the barycentric weights of p0, p1, p2
    """
    area = signed_area(p0, p1, p2)
    if area < 0:
        inside, b0, b2, b1 = triangle_coverage(p0, p2, p1, px, py)
        return inside, b0, b1, b2
    e0 = _edge(p1, p2, px, py)
    e1 = _edge(p2, p0, px, py)
    e2 = _edge(p0, p1, px, py)
    inside = _owns(p1, p2, e0) & _owns(p2, p0, e1) & _owns(p0, p1, e2)
    return inside, e0 / area, e1 / area, e2 / area


def pixel_bounds(xs: Sequence[float], ys: Sequence[float], size: int) -> Optional[tuple[int, int, int, int]]:
    """Inclusive pixel range whose centres can fall inside the given extent, or None."""
    x_lo = max(int(np.ceil(min(xs) - 0.5)), 0)
    x_hi = min(int(np.floor(max(xs) - 0.5)), size - 1)
    y_lo = max(int(np.ceil(min(ys) - 0.5)), 0)
    y_hi = min(int(np.floor(max(ys) - 0.5)), size - 1)
    if x_hi < x_lo or y_hi < y_lo:
        return None
    return x_lo, x_hi, y_lo, y_hi


def rasterize(mesh: Mesh, scene: Scene, size: Optional[int] = None) -> FragmentBuffer:
    """
    Rasterize the mesh as seen by the scene camera.

    Args:
        mesh: the face to draw
        scene: camera and light gain
        size: image side in pixels, defaults to ``scene.image_size``

    Returns:
        a FragmentBuffer; degenerate projected triangles are skipped and counted in
        ``degenerate``

    Example:
         .. code-block:: python

            from uvforge.render import rasterize, render_texture

            frag = rasterize(mesh, scene, 64)
            image = render_texture(frag, gt_texture)
    """
    size = size or scene.image_size
    if size < 8:
        raise ValueError(f"image size must be at least 8, got {size}")
    proj = scene.project(mesh.vertices, size)
    face_id = np.full((size, size), -1, dtype=np.int64)
    depth = np.full((size, size), np.inf)
    bary = np.zeros((size, size, 3))
    uv = np.zeros((size, size, 2))
    degenerate = 0

    for f, tri in enumerate(mesh.triangles):
        p0, p1, p2 = proj[tri[0]], proj[tri[1]], proj[tri[2]]
        area = signed_area(p0, p1, p2)
        if abs(area) < DEGENERATE_AREA:
            degenerate += 1
            continue
        if area > 0:
            continue
        bounds = pixel_bounds((p0[0], p1[0], p2[0]), (p0[1], p1[1], p2[1]), size)
        if bounds is None:
            continue
        x_lo, x_hi, y_lo, y_hi = bounds
        py, px = np.mgrid[y_lo : y_hi + 1, x_lo : x_hi + 1].astype(np.float64) + 0.5
        inside, b0, b1, b2 = triangle_coverage(p0, p1, p2, px, py)
        z = b0 * p0[2] + b1 * p1[2] + b2 * p2[2]
        window = (slice(y_lo, y_hi + 1), slice(x_lo, x_hi + 1))
        wins = inside & (z < depth[window])
        if not wins.any():
            continue
        depth[window][wins] = z[wins]
        face_id[window][wins] = f
        weights = np.stack([b0, b1, b2], axis=-1)
        bary[window][wins] = weights[wins]
        uv[window][wins] = weights[wins] @ mesh.uv_coords[tri]

    if degenerate:
        _logger.debug("skipped %d degenerate triangles", degenerate)
    return FragmentBuffer(
        face_id=face_id,
        bary=bary,
        depth=depth,
        uv=uv,
        light_gain=np.asarray(scene.light_gain, dtype=np.float64),
        degenerate=degenerate,
    )


def render_texture(frag: FragmentBuffer, tex: np.ndarray, gain: Optional[Sequence[float]] = None) -> np.ndarray:
    """
    Covered pixels take the bilinear texture sample at their interpolated UV, times the
    light gain; uncovered pixels are 0.
    """
    channels = tex.shape[2] if tex.ndim == 3 else 1
    gain = frag.light_gain if gain is None else np.asarray(gain, dtype=np.float64)
    out = np.zeros((frag.size, frag.size, channels), dtype=np.float32)
    covered = frag.covered
    samples = sample_uv(tex, frag.uv[covered, 0], frag.uv[covered, 1])
    if tex.ndim == 2:
        samples = samples[:, None]
    if channels == gain.shape[0]:
        samples = samples * gain
    out[covered] = samples
    return out


def render_uv_position(frag: FragmentBuffer) -> np.ndarray:
    """The image-domain UV position map: (u, v, 1) at covered pixels, 0 elsewhere."""
    out = np.zeros((frag.size, frag.size, 3), dtype=np.float32)
    covered = frag.covered
    out[covered, 0] = frag.uv[covered, 0]
    out[covered, 1] = frag.uv[covered, 1]
    out[covered, 2] = 1.0
    return out
