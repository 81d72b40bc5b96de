from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..types.face import Scene
from ..world.mesh import Mesh
from .raster import FragmentBuffer, rasterize

BLOB_SIGMA = 1.5
# a landmark is hidden when the z-buffer is this much nearer (pixels) or nothing covers it
DEPTH_TOLERANCE = 2.0


@dataclass(frozen=True)
class LandmarkSet:
    points: np.ndarray  # L×2 pixel coordinates (x, y)
    visible: np.ndarray  # L bool
    image: np.ndarray  # H×W float32, max over visible blobs
    sigma: float = BLOB_SIGMA

    def blob(self, index: int) -> np.ndarray:
        """Blob of one landmark, drawn whether or not it is visible."""
        return gaussian_blob(self.points[index], self.image.shape[0], self.sigma)


def gaussian_blob(point: np.ndarray, size: int, sigma: float = BLOB_SIGMA) -> np.ndarray:
    centers = np.arange(size) + 0.5
    gx = np.exp(-((centers - point[0]) ** 2) / (2.0 * sigma**2))
    gy = np.exp(-((centers - point[1]) ** 2) / (2.0 * sigma**2))
    return np.outer(gy, gx).astype(np.float32)


def _surface_depth(frag: FragmentBuffer, row: int, col: int) -> float:
    """
    Depth of the surface under a landmark pixel.

    An uncovered pixel on the silhouette takes the farthest covered depth of its 3×3
    neighbourhood; with no covered neighbour the depth is -inf, so the landmark is hidden.
    """
    if frag.covered[row, col]:
        return float(frag.depth[row, col])
    window = np.s_[max(row - 1, 0) : row + 2, max(col - 1, 0) : col + 2]
    near = frag.depth[window][frag.covered[window]]
    return float(near.max()) if near.size else -np.inf


def project_landmarks(
    mesh: Mesh,
    scene: Scene,
    image_size: Optional[int] = None,
    *,
    frag: Optional[FragmentBuffer] = None,
    points: Optional[np.ndarray] = None,
    sigma: float = BLOB_SIGMA,
) -> LandmarkSet:
    """
    Project the landmark vertices and draw a blob for each visible one.

    Args:
        mesh: face whose landmark vertices are projected
        scene: the camera
        image_size: image side, defaults to ``scene.image_size``
        frag: z-buffer to test visibility against; rasterized from ``mesh`` when omitted
        points: L×2 pixel positions to draw instead of the projections (detector noise)
        sigma: blob width in pixels

    Returns:
        a LandmarkSet
    """
    size = image_size or scene.image_size
    if mesh.landmark_indices.size == 0:
        raise ValueError("mesh has no landmarks")
    frag = frag or rasterize(mesh, scene, size)
    proj = scene.project(mesh.vertices[mesh.landmark_indices], size)
    xy = proj[:, :2] if points is None else np.asarray(points, dtype=np.float64)
    in_image = (xy[:, 0] >= 0) & (xy[:, 0] < size) & (xy[:, 1] >= 0) & (xy[:, 1] < size)
    visible = np.zeros(len(xy), dtype=bool)
    for k in np.flatnonzero(in_image):
        col, row = int(np.floor(proj[k, 0])), int(np.floor(proj[k, 1]))
        if not (0 <= col < size and 0 <= row < size):
            continue
        visible[k] = proj[k, 2] <= _surface_depth(frag, row, col) + DEPTH_TOLERANCE
    image = np.zeros((size, size), dtype=np.float32)
    for k in np.flatnonzero(visible):
        image = np.maximum(image, gaussian_blob(xy[k], size, sigma))
    return LandmarkSet(points=xy, visible=visible, image=image, sigma=sigma)
