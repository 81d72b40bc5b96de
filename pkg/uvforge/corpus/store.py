from collections import OrderedDict
from typing import Sequence, Union

from ..autodiff.rng import Rng
from ..dataprep import TrainingSample
from ..types.manifest import CorpusManifest, Split
from .generate import load_sample


class SampleStore(Sequence[TrainingSample]):
    """
    Random access to the training tensors of one split, read from disk on first use and kept
    in a bounded LRU cache. Ground truth is never loaded.
    """

    def __init__(self, manifest: CorpusManifest, split: Union[Split, str] = Split.train, cache: int = 256) -> None:
        self.manifest = manifest
        self.records = manifest.split(split)
        self._cache: OrderedDict[int, TrainingSample] = OrderedDict()
        self._capacity = cache

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return [self[i] for i in range(*index.indices(len(self)))]
        if index < 0:
            index += len(self)
        if index in self._cache:
            self._cache.move_to_end(index)
            return self._cache[index]
        sample = load_sample(self.manifest, self.records[index])
        self._cache[index] = sample
        if len(self._cache) > self._capacity:
            self._cache.popitem(last=False)
        return sample


def draw_batch(samples: Sequence[TrainingSample], rng: Rng, batch_size: int) -> list[TrainingSample]:
    """Uniform draw with replacement."""
    if len(samples) == 0:
        raise ValueError("cannot draw a batch from an empty sample set")
    return [samples[int(i)] for i in rng.integers(0, len(samples), size=batch_size)]
