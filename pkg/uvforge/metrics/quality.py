import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import ShapeError

SSIM_WINDOW = 8
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DATA_RANGE = 1.0


def _check(a: np.ndarray, b: np.ndarray, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if a.shape != b.shape or a.shape[:2] != mask.shape:
        raise ShapeError("metric inputs differ in shape", [a.shape, b.shape, mask.shape])
    if not mask.any():
        raise ValueError("metrics need a non-empty mask")
    if a.ndim == 2:
        a, b = a[..., None], b[..., None]
    return a, b, mask


def masked_rmse(a: np.ndarray, b: np.ndarray, mask: np.ndarray) -> float:
    a, b, mask = _check(a, b, mask)
    return float(np.sqrt(np.mean((a[mask] - b[mask]) ** 2)))


def psnr_from_rmse(rmse: float) -> float:
    """−20·log10(RMSE) for unit-range data; +inf for identical inputs."""
    if rmse == 0.0:
        return math.inf
    return -20.0 * math.log10(rmse / DATA_RANGE)


def masked_ssim(a: np.ndarray, b: np.ndarray, mask: np.ndarray) -> float:
    """
    Mean SSIM over every 8×8 window lying fully inside ``mask``, averaged over channels.

    Uses uniform windows, K1 = 0.01, K2 = 0.03 and dynamic range 1. NaN when no window fits.
    """
    a, b, mask = _check(a, b, mask)
    w = SSIM_WINDOW
    if mask.shape[0] < w or mask.shape[1] < w:
        return math.nan
    inside = sliding_window_view(mask, (w, w)).all(axis=(2, 3))
    if not inside.any():
        return math.nan
    c1 = (SSIM_K1 * DATA_RANGE) ** 2
    c2 = (SSIM_K2 * DATA_RANGE) ** 2
    # windows: rows × cols × channels × w × w
    wa = sliding_window_view(a, (w, w), axis=(0, 1))[inside]
    wb = sliding_window_view(b, (w, w), axis=(0, 1))[inside]
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    var_a = (wa * wa).mean(axis=(-2, -1)) - mu_a**2
    var_b = (wb * wb).mean(axis=(-2, -1)) - mu_b**2
    cov = (wa * wb).mean(axis=(-2, -1)) - mu_a * mu_b
    ssim = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2))
    return float(ssim.mean())


def masked_metrics(a: np.ndarray, b: np.ndarray, mask: np.ndarray) -> dict[str, float]:
    """
    RMSE, PSNR and SSIM of ``a`` against ``b`` over ``mask``.

    Raises:
        ValueError: when the mask is empty
        ShapeError: when the inputs differ in shape
    """
    rmse = masked_rmse(a, b, mask)
    return {"rmse": rmse, "psnr": psnr_from_rmse(rmse), "ssim": masked_ssim(a, b, mask)}
