"""
Raster files.

Every tensor is stored twice: a lossless sidecar and an 8-bit PNG preview. The sidecar is
a 16-byte little-endian header followed by the raw array in row-major order::

    4s  magic b"UVF1"
    I   dtype code (1 = float32, 2 = uint8)
    H   height
    H   width
    H   channels
    H   reserved, 0
"""

import struct
from os import PathLike
from pathlib import Path

import numpy as np
from PIL import Image

from ..exceptions import CorpusError, MissingFileError

RASTER_MAGIC = b"UVF1"
_HEADER = struct.Struct("<4sIHHHH")
_CODES = {1: np.dtype("<f4"), 2: np.dtype("u1")}


def write_raster(path: PathLike, array: np.ndarray) -> Path:
    path = Path(path)
    arr = np.asarray(array)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8)
    code = 2 if arr.dtype == np.uint8 else 1
    arr = np.ascontiguousarray(arr, dtype=_CODES[code])
    h, w = arr.shape[:2]
    c = arr.shape[2] if arr.ndim == 3 else 1
    with open(path, "wb") as f:
        f.write(_HEADER.pack(RASTER_MAGIC, code, h, w, c, 0))
        f.write(arr.tobytes())
    return path


def read_raster(path: PathLike) -> np.ndarray:
    """
    Read a sidecar raster. Single-channel rasters come back as H×W, uint8 rasters as bool.
    """
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"raster not found: {path}", path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise CorpusError(f"truncated raster {path}")
    magic, code, h, w, c, _ = _HEADER.unpack_from(data)
    if magic != RASTER_MAGIC or code not in _CODES:
        raise CorpusError(f"{path} is not a uvforge raster")
    dt = _CODES[code]
    expected = h * w * c * dt.itemsize
    if len(data) - _HEADER.size != expected:
        raise CorpusError(f"raster {path} holds {len(data) - _HEADER.size} payload bytes, expected {expected}")
    arr = np.frombuffer(data, dtype=dt, offset=_HEADER.size).reshape((h, w, c) if c > 1 else (h, w)).copy()
    return arr.astype(bool) if code == 2 else arr


def write_png(path: PathLike, array: np.ndarray) -> Path:
    """8-bit preview; values are clipped to [0, 1] and masks drawn as 0/255."""
    path = Path(path)
    arr = np.asarray(array)
    if arr.dtype == bool:
        pixels = arr.astype(np.uint8) * 255
    else:
        pixels = np.round(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    if pixels.ndim == 3 and pixels.shape[2] == 1:
        pixels = pixels[..., 0]
    Image.fromarray(pixels).save(path, format="PNG")
    return path
