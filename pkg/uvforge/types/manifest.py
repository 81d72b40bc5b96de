import json
from enum import Enum
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .face import FaceParams, Scene

MANIFEST_NAME = "manifest.jsonl"
MANIFEST_KIND = "uvforge-corpus"
EVAL_ONLY = frozenset({"gt_uv"})


class Split(str, Enum):
    train = "train"
    eval = "eval"


class SampleRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: str = Field(description="Sample id, also the file name prefix.")
    index: int = Field(description="Position of the sample in generation order.")
    seed: int = Field(description="Corpus root seed the sample stream derives from.")
    split: Split
    attempts: int = Field(default=1, description="Scene draws it took to get a non-empty skin mask.")
    files: dict[str, str] = Field(description="Training tensors: name -> sidecar file, relative to the corpus root.")
    previews: dict[str, str] = Field(default_factory=dict, description="8-bit PNG previews of the training tensors.")
    eval_files: dict[str, str] = Field(
        default_factory=dict, description="Eval-only tensors (the ground-truth texture); never read by training."
    )
    true_params: FaceParams
    true_scene: Scene
    fitted_params: FaceParams
    fitted_scene: Scene

    @field_validator("files")
    @classmethod
    def _no_ground_truth(cls, v: dict[str, str]) -> dict[str, str]:
        leaked = EVAL_ONLY.intersection(v)
        if leaked:
            raise ValueError(f"eval-only tensors listed as training inputs: {sorted(leaked)}")
        return v


class CorpusManifest(BaseModel):
    """
    Index of a generated corpus. Stored as JSON lines: one header line, then one
    SampleRecord per line in generation order.
    """

    root: Path = Field(description="Corpus directory; record file names are relative to it.")
    config: dict[str, Any] = Field(default_factory=dict, description="Corpus section of the generating config.")
    records: list[SampleRecord] = Field(default_factory=list)
    skipped: list[str] = Field(default_factory=list, description="Ids dropped after repeated rejection.")

    def split(self, split: Split | str) -> list[SampleRecord]:
        split = Split(split)
        return [r for r in self.records if r.split is split]

    def record(self, sample_id: str) -> SampleRecord:
        for r in self.records:
            if r.id == sample_id:
                return r
        raise KeyError(f"no sample {sample_id!r} in corpus {self.root}")

    def path(self, name: str) -> Path:
        return self.root / name

    def training_paths(self) -> list[Path]:
        return [self.path(f) for r in self.records for f in r.files.values()]

    def eval_only_paths(self) -> list[Path]:
        return [self.path(f) for r in self.records for f in r.eval_files.values()]

    def missing_files(self) -> list[Path]:
        return [p for p in self.training_paths() + self.eval_only_paths() if not p.exists()]

    def write(self, path: Optional[Path] = None) -> Path:
        path = path or self.root / MANIFEST_NAME
        header = {"kind": MANIFEST_KIND, "version": 1, "config": self.config, "skipped": self.skipped}
        lines = [json.dumps(header, sort_keys=True)]
        lines.extend(r.model_dump_json() for r in self.records)
        path.write_text("\n".join(lines) + "\n")
        return path
