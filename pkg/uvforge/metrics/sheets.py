from os import PathLike
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
import PIL
from packaging.version import InvalidVersion, Version
from PIL import Image, ImageDraw, ImageFont

SHEET_COLUMNS = ["input", "T_w", "recovered", "render", "GT"]
_HEADER = 24
_PAD = 4
_SCALE = 2


# Layout: a header row of column labels, then one row per sample. Missing cells stay grey
# so rows line up when a baseline has no render or a sample has no GT.
def contact_sheet(
    rows: Sequence[Mapping[str, Optional[np.ndarray]]],
    columns: Sequence[str] = SHEET_COLUMNS,
    scale: int = _SCALE,
) -> Image.Image:
    """
    Grid image with one labelled column per entry of ``columns`` and one row per sample.

    Args:
        rows: per sample, column name -> H×W×3 (or H×W) array in [0, 1]; absent keys stay blank
        columns: column order and header labels
        scale: nearest-neighbour magnification of every cell

    Returns:
        an RGB image

    Example:

         .. code-block:: python

            from uvforge.metrics import contact_sheet

            sheet = contact_sheet([{"input": sample.I_w, "T_w": sample.T_w, "recovered": result.texture}])
            sheet.save("sheet.png")
    """
    cells = [arr for row in rows for arr in row.values() if arr is not None]
    cell = max((max(a.shape[:2]) for a in cells), default=16) * scale
    width = len(columns) * (cell + _PAD) + _PAD
    height = _HEADER + len(rows) * (cell + _PAD) + _PAD
    sheet = Image.new("RGB", (width, height), "dimgrey")
    canvas = ImageDraw.ImageDraw(sheet)
    font = _label_font()
    for j, name in enumerate(columns):
        canvas.text((_PAD + j * (cell + _PAD), 4), name, fill="white", font=font)
    for i, row in enumerate(rows):
        for j, name in enumerate(columns):
            arr = row.get(name)
            if arr is None:
                continue
            tile = to_image(arr).resize((cell, cell), Image.NEAREST)
            sheet.paste(tile, (_PAD + j * (cell + _PAD), _HEADER + i * (cell + _PAD)))
    return sheet


def write_contact_sheet(path: PathLike, rows: Sequence[Mapping[str, Optional[np.ndarray]]], **kwargs) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    contact_sheet(rows, **kwargs).save(path)
    return path


def to_image(arr: np.ndarray) -> Image.Image:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=2)
    return Image.fromarray(np.round(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8))


def _supports_font_size() -> bool:
    try:
        return Version(PIL.__version__) >= Version("10.1.0")
    except InvalidVersion:
        return False


def _label_font():
    if _supports_font_size():
        return ImageFont.load_default(size=14)
    else:
        return ImageFont.load_default()
