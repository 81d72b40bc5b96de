import numpy as np


def bilinear(img: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """
    Sample ``img`` (H×W or H×W×C) at continuous index coordinates.

    The centre of element ``[i, j]`` sits at ``(x, y) = (j, i)``; coordinates outside the
    grid clamp to the edge. Returns an array shaped like ``x`` (plus the channel axis).
    """
    h, w = img.shape[:2]
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, w - 1)
    y = np.clip(np.asarray(y, dtype=np.float64), 0.0, h - 1)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    if img.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    src = img.astype(np.float64, copy=False)
    # a + (b - a)·f keeps constant regions exact
    top = src[y0, x0] + (src[y0, x1] - src[y0, x0]) * fx
    bottom = src[y1, x0] + (src[y1, x1] - src[y1, x0]) * fx
    return top + (bottom - top) * fy


def sample_uv(tex: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bilinear texture lookup at atlas coordinates in [0, 1]²."""
    h, w = tex.shape[:2]
    return bilinear(tex, np.asarray(u) * w - 0.5, np.asarray(v) * h - 0.5)


def sample_pixels(img: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Bilinear image lookup at pixel coordinates (pixel centres at integer + 0.5)."""
    return bilinear(img, np.asarray(px) - 0.5, np.asarray(py) - 0.5)
