from .generate import (
    CorpusWriter,
    build_sample,
    generate_corpus,
    load_ground_truth,
    load_manifest,
    load_sample,
)
from .rasters import RASTER_MAGIC, read_raster, write_png, write_raster
from .store import SampleStore, draw_batch

__all__ = [
    "CorpusWriter",
    "build_sample",
    "generate_corpus",
    "load_ground_truth",
    "load_manifest",
    "load_sample",
    "RASTER_MAGIC",
    "read_raster",
    "write_png",
    "write_raster",
    "SampleStore",
    "draw_batch",
]
