"""
Synthetic corpus generation.

Each sample's randomness comes from ``Rng(seed, "sample", index)`` and nothing else, so the
worker count and completion order never change a single output byte.

    manifest = generate_corpus(CorpusConfig(train_count=8, eval_count=2), "runs/c1")
"""

import json
import logging
import shutil
import sys
import threading
from os import PathLike
from pathlib import Path
from queue import Empty, Queue
from typing import Optional

from ..autodiff.rng import Rng
from ..config import UvforgeSettings
from ..dataprep import TrainingSample, perturb_fit, prepare_sample
from ..exceptions import CorpusError, MissingFileError, SampleRejectedError
from ..runlog import EventLog
from ..types.config import CorpusConfig
from ..types.manifest import MANIFEST_KIND, MANIFEST_NAME, CorpusManifest, SampleRecord, Split
from ..world import sample_face, sample_scene, synthesize_gt_texture
from .rasters import read_raster, write_png, write_raster

_logger = logging.getLogger(__name__)
_logger.setLevel(logging.INFO)
_logger.addHandler(logging.StreamHandler(sys.stderr))

g_logger = logging.getLogger("CorpusWriter")

SAMPLES_DIR = "samples"


class Job:
    __slots__ = ("index", "sample_id", "split")

    def __init__(self, index: int, sample_id: str, split: Split) -> None:
        self.index = index
        self.sample_id = sample_id
        self.split = split


def sample_ids(config: CorpusConfig) -> list[Job]:
    jobs = [Job(i, f"face_{i:05d}", Split.train) for i in range(config.train_count)]
    start = config.train_count
    jobs += [Job(start + i, f"face_{start + i:05d}", Split.eval) for i in range(config.eval_count)]
    return jobs


def build_sample(config: CorpusConfig, index: int, sample_id: str, log: Optional[EventLog] = None):
    """
    Draw one face and prepare it, redrawing the scene after a rejection.

    Returns:
        (TrainingSample, gt texture, record fields) or None when every attempt was rejected
    """
    log = log or EventLog()
    rng = Rng(config.seed, "sample", index)
    params = sample_face(rng.child("face"))
    gt = synthesize_gt_texture(params, rng.child("texture"), uv_size=config.uv_size, detail_prob=config.detail_prob)
    for attempt in range(config.max_resample + 1):
        scene_rng = rng.child("scene", attempt)
        scene = sample_scene(
            scene_rng, config.pose_range, occluder_prob=config.occluder_prob, image_size=config.image_size
        )
        fitted_params, fitted_scene = perturb_fit(params, scene, config.perturbation, scene_rng.child("fit"))
        try:
            sample = prepare_sample(
                gt, params, scene, fitted_params, fitted_scene, config, scene_rng.child("landmarks"), sample_id
            )
        except SampleRejectedError as e:
            log.warn("sample_rejected", str(e), sample=sample_id, attempt=attempt, reason=e.reason)
            continue
        fields = dict(
            true_params=params,
            true_scene=scene,
            fitted_params=fitted_params,
            fitted_scene=fitted_scene,
            attempts=attempt + 1,
        )
        return sample, gt, fields
    return None


def write_sample(out_dir: Path, sample: TrainingSample, gt) -> tuple[dict[str, str], dict[str, str], dict[str, str]]:
    files, previews = {}, {}
    for name, arr in sample.arrays().items():
        stem = f"{SAMPLES_DIR}/{sample.sample_id}_{name}"
        write_raster(out_dir / f"{stem}.uvf", arr)
        write_png(out_dir / f"{stem}.png", arr)
        files[name] = f"{stem}.uvf"
        previews[name] = f"{stem}.png"
    gt_name = f"{SAMPLES_DIR}/{sample.sample_id}_gt_uv.uvf"
    write_raster(out_dir / gt_name, gt)
    return files, previews, {"gt_uv": gt_name}


class CorpusWriter:
    """
    Worker pool over sample ids. Call ``run()`` once; it returns when every job is done
    or raises after the first failure.
    """

    def __init__(self, config: CorpusConfig, out_dir: Path, threads: int, log: EventLog) -> None:
        self.config = config
        self.out_dir = out_dir
        self.log = log
        self.job_q: Queue = Queue()
        self.records: dict[int, SampleRecord] = {}
        self.skipped: dict[int, str] = {}
        self.failure: Optional[tuple[str, BaseException]] = None
        self.lock = threading.Lock()
        self.workers = [
            threading.Thread(target=self._worker, name=f"CorpusWorker-{i}", daemon=True) for i in range(threads)
        ]

    def run(self, jobs: list[Job]) -> None:
        for job in jobs:
            self.job_q.put(job)
        for w in self.workers:
            w.start()
        for w in self.workers:
            w.join()
        if self.failure is not None:
            sample_id, err = self.failure
            raise CorpusError(f"generating {sample_id} failed: {err}", sample_id) from err

    def _worker(self) -> None:
        while self.failure is None:
            try:
                job = self.job_q.get_nowait()
            except Empty:
                return
            try:
                self._one(job)
            except Exception as e:
                g_logger.warning(f"Exception for {job.sample_id} {e}")
                with self.lock:
                    if self.failure is None:
                        self.failure = (job.sample_id, e)
                return

    def _one(self, job: Job) -> None:
        built = build_sample(self.config, job.index, job.sample_id, self.log)
        if built is None:
            g_logger.info(f"Skipped {job.sample_id}")
            self.log.warn("sample_skipped", f"{job.sample_id} rejected {self.config.max_resample + 1} times")
            with self.lock:
                self.skipped[job.index] = job.sample_id
            return
        sample, gt, fields = built
        files, previews, eval_files = write_sample(self.out_dir, sample, gt)
        record = SampleRecord(
            id=job.sample_id,
            index=job.index,
            seed=self.config.seed,
            split=job.split,
            files=files,
            previews=previews,
            eval_files=eval_files,
            **fields,
        )
        with self.lock:
            self.records[job.index] = record
        g_logger.info(f"Finished {job.sample_id}")


def _cleanup(out_dir: Path) -> None:
    shutil.rmtree(out_dir / SAMPLES_DIR, ignore_errors=True)
    manifest = out_dir / MANIFEST_NAME
    if manifest.exists():
        manifest.unlink()


def generate_corpus(
    config: CorpusConfig,
    out_dir: PathLike,
    *,
    threads: Optional[int] = None,
    log: Optional[EventLog] = None,
) -> CorpusManifest:
    """
    Generate every sample of the corpus and write its manifest.

    Args:
        config: corpus section of the run config
        out_dir: corpus root, created when missing
        threads: worker count; defaults to the UVFORGE_THREADS setting
        log: event log for rejections and skips

    Returns:
        the CorpusManifest, also written to ``<out_dir>/manifest.jsonl``

    Raises:
        CorpusError: on any I/O failure; everything written so far is removed first
    """
    out_dir = Path(out_dir)
    log = log or EventLog()
    jobs = sample_ids(config)
    threads = max(1, min(threads or UvforgeSettings().threads(), len(jobs)))
    try:
        (out_dir / SAMPLES_DIR).mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise CorpusError(f"cannot create corpus directory {out_dir}: {e}") from e

    _logger.info(f"Generating {len(jobs)} samples into {out_dir} with {threads} threads")
    writer = CorpusWriter(config, out_dir, threads, log)
    try:
        writer.run(jobs)
        manifest = CorpusManifest(
            root=out_dir,
            config=config.model_dump(mode="json"),
            records=[writer.records[i] for i in sorted(writer.records)],
            skipped=[writer.skipped[i] for i in sorted(writer.skipped)],
        )
        manifest.write()
    except (CorpusError, OSError) as e:
        _cleanup(out_dir)
        if isinstance(e, CorpusError):
            raise
        raise CorpusError(f"writing the manifest failed: {e}") from e
    log.emit("corpus_done", samples=len(manifest.records), skipped=len(manifest.skipped))
    return manifest


def load_manifest(root: PathLike, *, check_files: bool = True) -> CorpusManifest:
    root = Path(root)
    path = root / MANIFEST_NAME if root.is_dir() else root
    root = path.parent
    if not path.exists():
        raise MissingFileError(f"corpus manifest not found: {path}", path)
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise CorpusError(f"empty manifest {path}")
    header = json.loads(lines[0])
    if header.get("kind") != MANIFEST_KIND:
        raise CorpusError(f"{path} is not a uvforge corpus manifest")
    manifest = CorpusManifest(
        root=root,
        config=header.get("config", {}),
        skipped=header.get("skipped", []),
        records=[SampleRecord.model_validate_json(ln) for ln in lines[1:]],
    )
    if check_files:
        missing = manifest.missing_files()
        if missing:
            raise MissingFileError(f"{len(missing)} corpus files missing, first {missing[0]}", missing[0])
    return manifest


def load_sample(manifest: CorpusManifest, record: SampleRecord) -> TrainingSample:
    """Read the training tensors of one record. Eval-only files are never touched."""
    arrays = {name: read_raster(manifest.path(f)) for name, f in record.files.items()}
    missing = [n for n in TrainingSample.tensor_names() if n not in arrays and n != "image"]
    if missing:
        raise CorpusError(f"record {record.id} lacks tensors {missing}", record.id)
    return TrainingSample(sample_id=record.id, **arrays)


def load_ground_truth(manifest: CorpusManifest, record: SampleRecord):
    """The held-out GT texture; for evaluation code only."""
    return read_raster(manifest.path(record.eval_files["gt_uv"]))
