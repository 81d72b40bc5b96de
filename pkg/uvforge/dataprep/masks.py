from typing import Sequence

import numpy as np

from ..exceptions import ShapeError
from ..render.raster import FragmentBuffer
from ..types.face import Scene


def polygon_mask(polygon: Sequence[tuple[float, float]], size: int) -> np.ndarray:
    """Pixels whose centre lies inside (or on) a convex polygon of either winding."""
    centers = np.arange(size) + 0.5
    py, px = np.meshgrid(centers, centers, indexing="ij")
    pts = np.asarray(polygon, dtype=np.float64)
    nxt = np.roll(pts, -1, axis=0)
    cross = [(b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0]) for a, b in zip(pts, nxt)]
    stacked = np.stack(cross)
    return np.all(stacked >= 0, axis=0) | np.all(stacked <= 0, axis=0)


def occluder_mask(scene: Scene, size: int) -> np.ndarray:
    mask = np.zeros((size, size), dtype=bool)
    zoom = size / scene.image_size
    for occ in scene.occluders:
        mask |= polygon_mask([(x * zoom, y * zoom) for x, y in occ.polygon], size)
    return mask


def skin_mask_wild(scene: Scene, frag: FragmentBuffer) -> np.ndarray:
    """M_I^w: pixels covered by the head and outside every occluder. ``frag`` must come from the true scene."""
    return frag.covered & ~occluder_mask(scene, frag.size)


def compose_masks(wild: np.ndarray, model: np.ndarray) -> np.ndarray:
    """
    M_I = M_I^w ⊙ M_I^m. Boolean masks are ANDed, soft masks multiplied.
    """
    if wild.shape != model.shape:
        raise ShapeError("masks must share one resolution", [wild.shape, model.shape])
    if wild.dtype == bool and model.dtype == bool:
        return wild & model
    return wild.astype(np.float32) * model.astype(np.float32)


def composite_occluders(image: np.ndarray, scene: Scene) -> np.ndarray:
    """Paint each occluder polygon over the image in its characteristic colour, in list order."""
    out = image.copy()
    size = image.shape[0]
    zoom = size / scene.image_size
    for occ in scene.occluders:
        inside = polygon_mask([(x * zoom, y * zoom) for x, y in occ.polygon], size)
        out[inside] = np.asarray(occ.kind.color, dtype=out.dtype)
    return out
