"""
The bundled proxy head.

A latitude/longitude sheet over an ellipsoid, open along a seam at the back of the head and
at crown and chin. Row ``i`` runs from chin to crown, column ``j`` from the back-left seam
through the face centre (column 12) to the back-right seam. The UV atlas is that grid
mapped into [0.02, 0.98]², with v = 0 at the crown, so UV triangles never overlap.

Linear blendshapes displace the base vertices:

    vertices = base + Σ shape_weights[i]·Δshape_i + Σ expression_weights[k]·Δexpr_k
"""

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from ..exceptions import ShapeError
from ..types.face import SHAPE_COUNT, EXPRESSION_COUNT, FaceParams

N_LAT = 20
N_LON = 25
THETA_RANGE = (-65.0, 80.0)
PHI_SPAN = 0.96 * 180.0
RADII = (0.78, 1.0, 0.9)
ATLAS_MARGIN = 0.02
LANDMARK_COUNT = 16

# (row, column) of each landmark vertex
_LANDMARK_GRID = [
    (10, 14),  # eye outer, subject left
    (10, 13),  # eye inner, subject left
    (10, 11),  # eye inner, subject right
    (10, 10),  # eye outer, subject right
    (8, 12),  # nose tip
    (7, 13),
    (7, 11),
    (5, 14),  # mouth corners
    (5, 10),
    (6, 12),  # upper lip
    (4, 12),  # lower lip
    (1, 12),  # chin
    (5, 16),  # jaw
    (5, 8),
    (2, 15),
    (2, 9),
]

# u0, u1, v0, v1 boxes in atlas coordinates
ATLAS_REGIONS: dict[str, list[tuple[float, float, float, float]]] = {
    "lips": [(0.44, 0.56, 0.66, 0.80)],
    "eyes": [(0.40, 0.47, 0.44, 0.51), (0.53, 0.60, 0.44, 0.51)],
    "brows": [(0.39, 0.47, 0.37, 0.43), (0.53, 0.61, 0.37, 0.43)],
    "forehead": [(0.38, 0.62, 0.17, 0.36)],
    "nose": [(0.46, 0.54, 0.48, 0.64)],
    "cheek_left": [(0.60, 0.75, 0.50, 0.70)],
    "cheek_right": [(0.25, 0.40, 0.50, 0.70)],
    "beard": [(0.32, 0.68, 0.80, 0.96)],
    "back": [(0.02, 0.15, 0.02, 0.98), (0.85, 0.98, 0.02, 0.98)],
}


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray  # V×3 float64, object units
    triangles: np.ndarray  # F×3 int64
    uv_coords: np.ndarray  # V×2 in [0, 1]²
    landmark_indices: np.ndarray  # L vertex ids

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]


def _vertex_index(i: int, j: int) -> int:
    return i * N_LON + j


def _grid_angles() -> tuple[np.ndarray, np.ndarray]:
    theta = np.radians(np.linspace(THETA_RANGE[0], THETA_RANGE[1], N_LAT))
    phi = np.radians(np.linspace(-PHI_SPAN, PHI_SPAN, N_LON))
    return np.meshgrid(theta, phi, indexing="ij")


@lru_cache(maxsize=1)
def atlas_topology() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    tris = []
    for i in range(N_LAT - 1):
        for j in range(N_LON - 1):
            a, b = _vertex_index(i, j), _vertex_index(i, j + 1)
            c, d = _vertex_index(i + 1, j + 1), _vertex_index(i + 1, j)
            tris.append((a, b, c))
            tris.append((a, c, d))
    triangles = np.array(tris, dtype=np.int64)
    rows, cols = np.meshgrid(np.arange(N_LAT), np.arange(N_LON), indexing="ij")
    span = 1.0 - 2 * ATLAS_MARGIN
    u = ATLAS_MARGIN + span * cols / (N_LON - 1)
    v = ATLAS_MARGIN + span * (N_LAT - 1 - rows) / (N_LAT - 1)
    uv = np.stack([u.reshape(-1), v.reshape(-1)], axis=1)
    landmarks = np.array([_vertex_index(i, j) for i, j in _LANDMARK_GRID], dtype=np.int64)
    for arr in (triangles, uv, landmarks):
        arr.setflags(write=False)
    return triangles, uv, landmarks


@lru_cache(maxsize=1)
def base_vertices() -> np.ndarray:
    theta, phi = _grid_angles()
    a, b, c = RADII
    verts = np.stack(
        [a * np.cos(theta) * np.sin(phi), b * np.sin(theta), c * np.cos(theta) * np.cos(phi)], axis=-1
    ).reshape(-1, 3)
    verts.setflags(write=False)
    return verts


def _bump(theta: np.ndarray, phi: np.ndarray, t0: float, p0: float, width: float) -> np.ndarray:
    d2 = (np.degrees(theta) - t0) ** 2 + (np.degrees(phi) - p0) ** 2
    return np.exp(-d2 / (2.0 * width**2))


@lru_cache(maxsize=1)
def blendshape_basis() -> tuple[np.ndarray, np.ndarray]:
    """Displacement fields, S×V×3 for shape and E×V×3 for expression."""
    theta, phi = _grid_angles()
    theta, phi = theta.reshape(-1), phi.reshape(-1)
    base = base_vertices()
    a, b, c = RADII
    normals = base / np.array([a * a, b * b, c * c])
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)

    def along_normal(field: np.ndarray, amp: float) -> np.ndarray:
        return normals * (amp * field)[:, None]

    def axis(index: int, amp: float) -> np.ndarray:
        d = np.zeros_like(base)
        d[:, index] = amp * base[:, index]
        return d

    def mirrored(t0: float, p0: float, width: float) -> np.ndarray:
        return _bump(theta, phi, t0, p0, width) + _bump(theta, phi, t0, -p0, width)

    shape = [
        axis(0, 0.12),  # head width
        axis(1, 0.10),  # face length
        along_normal(_bump(theta, phi, 5.0, 0.0, 12.0), 0.12),  # nose
        along_normal(mirrored(-10.0, 35.0, 18.0), 0.06),  # cheeks
        along_normal(_bump(theta, phi, 22.0, 0.0, 20.0), 0.05),  # brow ridge
        along_normal(_bump(theta, phi, -55.0, 0.0, 15.0), 0.07),  # chin
        along_normal(mirrored(-40.0, 50.0, 15.0), 0.06),  # jaw width
        axis(2, 0.10),  # head depth
    ]
    smile = np.zeros_like(base)
    corners = mirrored(-25.0, 20.0, 10.0)
    smile[:, 0] = 0.03 * np.sign(phi) * corners
    smile[:, 1] = 0.04 * corners
    mouth = np.zeros_like(base)
    mouth[:, 1] = -0.08 * _bump(theta, phi, -40.0, 0.0, 15.0)
    brow = np.zeros_like(base)
    brow[:, 1] = 0.05 * _bump(theta, phi, 28.0, 0.0, 18.0)
    expression = [mouth, smile, brow, along_normal(mirrored(-15.0, 30.0, 14.0), 0.05)]
    shape_basis = np.stack(shape)
    expr_basis = np.stack(expression)
    assert shape_basis.shape[0] == SHAPE_COUNT and expr_basis.shape[0] == EXPRESSION_COUNT
    shape_basis.setflags(write=False)
    expr_basis.setflags(write=False)
    return shape_basis, expr_basis


def build_mesh(params: FaceParams) -> Mesh:
    """
    Evaluate the linear blendshape model.

    Args:
        params: blendshape coefficients (already clamped to [-1, 1])

    Returns:
        a Mesh; triangles, uv_coords and landmark_indices are shared by every face
    """
    shape_basis, expr_basis = blendshape_basis()
    w_shape = np.asarray(params.shape_weights, dtype=np.float64)
    w_expr = np.asarray(params.expression_weights, dtype=np.float64)
    if w_shape.shape != (shape_basis.shape[0],) or w_expr.shape != (expr_basis.shape[0],):
        raise ShapeError("blendshape weights do not match the bundled basis", [w_shape.shape, w_expr.shape])
    vertices = base_vertices() + np.tensordot(w_shape, shape_basis, axes=1) + np.tensordot(w_expr, expr_basis, axes=1)
    triangles, uv, landmarks = atlas_topology()
    return Mesh(vertices=vertices, triangles=triangles, uv_coords=uv, landmark_indices=landmarks)


def texel_centers(uv_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Atlas coordinates (u, v) of every texel centre, each uv_size×uv_size."""
    c = (np.arange(uv_size) + 0.5) / uv_size
    v, u = np.meshgrid(c, c, indexing="ij")
    return u, v


def region_mask(names: Sequence[str] | str, uv_size: int) -> np.ndarray:
    """Boolean uv_size×uv_size mask of the union of named atlas regions."""
    if isinstance(names, str):
        names = [names]
    u, v = texel_centers(uv_size)
    mask = np.zeros((uv_size, uv_size), dtype=bool)
    for name in names:
        if name not in ATLAS_REGIONS:
            raise KeyError(f"unknown atlas region {name!r}; known: {sorted(ATLAS_REGIONS)}")
        for u0, u1, v0, v1 in ATLAS_REGIONS[name]:
            mask |= (u >= u0) & (u <= u1) & (v >= v0) & (v <= v1)
    return mask
