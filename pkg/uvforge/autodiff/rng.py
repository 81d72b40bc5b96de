import hashlib
from typing import Optional, Sequence, Union

import numpy as np

Key = Union[int, str]


def _key_int(key: Key) -> int:
    if isinstance(key, str):
        return int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:4], "little")
    if key < 0:
        raise ValueError(f"rng keys must be non-negative, got {key}")
    return int(key)


class Rng:
    """
    Seedable counter-based random stream (Philox).

    ``child(*keys)`` derives an independent stream from (seed, parent keys, keys), so a
    sample's randomness depends only on its id and never on generation order.
    """

    def __init__(self, seed: int, *keys: Key) -> None:
        self.seed = int(seed)
        self.keys = tuple(_key_int(k) for k in keys)
        self._gen = np.random.Generator(np.random.Philox(np.random.SeedSequence([self.seed, *self.keys])))

    def child(self, *keys: Key) -> "Rng":
        return Rng(self.seed, *self.keys, *keys)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform(self, low: float = 0.0, high: float = 1.0, size: Optional[Union[int, Sequence[int]]] = None):
        return self._gen.uniform(low, high, size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size: Optional[Union[int, Sequence[int]]] = None):
        return self._gen.normal(loc, scale, size)

    def integers(self, low: int, high: int, size: Optional[Union[int, Sequence[int]]] = None):
        return self._gen.integers(low, high, size)

    def bernoulli(self, p: float) -> bool:
        return bool(self._gen.random() < p)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, keys={self.keys})"
