"""
Flat archive of named arrays.

Layout (all integers little-endian)::

    b"UVFORGE-CKPT-1\\n"
    u32 metadata length, metadata as UTF-8 JSON
    u32 entry count
    per entry: u16 name length, UTF-8 name, u8 dtype tag, u8 ndim, ndim × u32 extents, payload
"""

import json
import os
import struct
from os import PathLike
from pathlib import Path
from typing import Any, BinaryIO, Mapping, Optional

import numpy as np

from ..exceptions import CheckpointError, MissingFileError

CHECKPOINT_MAGIC = b"UVFORGE-CKPT-1"

_DTYPE_TAGS = {1: np.dtype("<f4"), 2: np.dtype("<f8"), 3: np.dtype("<i4"), 4: np.dtype("<i8")}
_TAG_FOR = {dt: tag for tag, dt in _DTYPE_TAGS.items()}


class Checkpoint:
    __slots__ = ("metadata", "arrays")
    metadata: dict[str, Any]
    arrays: dict[str, np.ndarray]

    def __init__(self, metadata: dict[str, Any], arrays: dict[str, np.ndarray]) -> None:
        self.metadata = metadata
        self.arrays = arrays

    @property
    def modules(self) -> list[str]:
        return list(self.metadata.get("modules", []))

    def section(self, module: str) -> dict[str, np.ndarray]:
        """Arrays of one module with the ``module.`` prefix stripped."""
        prefix = f"{module}."
        found = {k[len(prefix) :]: v for k, v in self.arrays.items() if k.startswith(prefix)}
        if not found:
            raise CheckpointError(f"checkpoint has no module named {module!r}", [module])
        return found


def _write(f: BinaryIO, arrays: Mapping[str, np.ndarray], metadata: Mapping[str, Any]) -> None:
    meta = json.dumps(dict(metadata), sort_keys=True).encode("utf-8")
    f.write(CHECKPOINT_MAGIC + b"\n")
    f.write(struct.pack("<I", len(meta)))
    f.write(meta)
    f.write(struct.pack("<I", len(arrays)))
    for name in sorted(arrays):
        arr = np.asarray(arrays[name])
        dt = arr.dtype.newbyteorder("<")
        if dt not in _TAG_FOR:
            raise CheckpointError(f"unsupported dtype {arr.dtype} for {name}", [name])
        encoded = name.encode("utf-8")
        f.write(struct.pack("<H", len(encoded)))
        f.write(encoded)
        f.write(struct.pack("<BB", _TAG_FOR[dt], arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        f.write(np.ascontiguousarray(arr, dtype=dt).tobytes())


def save_checkpoint(
    path: PathLike, arrays: Mapping[str, np.ndarray], metadata: Optional[Mapping[str, Any]] = None
) -> Path:
    """Write atomically: a crash mid-write never replaces a good checkpoint."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        _write(f, arrays, metadata or {})
    os.replace(tmp, path)
    return path


def _read_exact(f: BinaryIO, n: int, path: Path) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CheckpointError(f"truncated checkpoint {path}")
    return data


def load_checkpoint(path: PathLike) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"checkpoint not found: {path}", path)
    with open(path, "rb") as f:
        magic = f.readline().rstrip(b"\n")
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path} is not a uvforge checkpoint (magic {magic[:32]!r})")
        (meta_len,) = struct.unpack("<I", _read_exact(f, 4, path))
        metadata = json.loads(_read_exact(f, meta_len, path).decode("utf-8"))
        (count,) = struct.unpack("<I", _read_exact(f, 4, path))
        arrays: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(f, 2, path))
            name = _read_exact(f, name_len, path).decode("utf-8")
            tag, ndim = struct.unpack("<BB", _read_exact(f, 2, path))
            if tag not in _DTYPE_TAGS:
                raise CheckpointError(f"unknown dtype tag {tag} for {name}", [name])
            shape = struct.unpack(f"<{ndim}I", _read_exact(f, 4 * ndim, path))
            dt = _DTYPE_TAGS[tag]
            count_items = int(np.prod(shape)) if ndim else 1
            payload = _read_exact(f, count_items * dt.itemsize, path)
            arrays[name] = np.frombuffer(payload, dtype=dt).reshape(shape).astype(dt.newbyteorder("="))
    return Checkpoint(metadata, arrays)
