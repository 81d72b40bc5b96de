"""
Render-and-compare evaluation, baselines and the ablation matrix.

For each eval face the recovered texture is rendered through the TRUE mesh and scene and
compared with I_w over M_I; the texture itself is compared with the held-out ground truth
over the atlas mask. A colour-adjusted texture already carries the scene illumination, so
it is rendered with unit gain; raw textures get the scene's light gain.
"""

import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path
from typing import Optional, Protocol, Sequence, Union

import numpy as np
import pandas as pd

from ..assembly import (
    DEFAULT_ARM,
    InferenceModel,
    RecoveryRequest,
    RecoveryResult,
    assemble,
    compose_edit,
    resolve_arm,
)
from ..config import config_fingerprint
from ..corpus import load_ground_truth, load_sample
from ..dataprep import split_views
from ..dataprep.prepare import UNIT_GAIN
from ..exceptions import MissingFileError, UvforgeError
from ..render import atlas_mask, rasterize, render_texture
from ..runlog import EventLog
from ..types.config import TABLE_ARMS, RunConfig
from ..types.manifest import CorpusManifest, SampleRecord
from ..world import build_mesh
from .quality import masked_metrics, masked_rmse
from .report import METRIC_COLUMNS, MetricsReport, SampleMetrics, jsonable
from .sheets import write_contact_sheet

_logger = logging.getLogger(__name__)
_logger.setLevel(logging.INFO)
_logger.addHandler(logging.StreamHandler(sys.stderr))

DEFAULT_GUIDANCE_SCALES = [1.0, 1.4, 2.0, 3.0]

# (better, worse): the first arm should reach a lower mean GT-UV RMSE
ORDERING_CHECKS = [("ch+self", "ch+ch"), ("ch+self", "self+self"), ("ch+self", "no-lm"), ("ch+self", "no-adj")]

RANK_METRIC = "uv_rmse"
MEAN_FILL = "mean-fill"
# the default arm must stay at or below this fraction of the baseline error
BASELINE_MARGIN = 0.8
VIEW_CONDITIONS = ["view_0", "view_1", "both"]


class RecoveryModel(Protocol):
    color_adjust: bool

    def recover(self, request: RecoveryRequest, *, log: Optional[EventLog] = None) -> RecoveryResult: ...


class MeanFillModel:
    """Baseline: known texels kept, every other atlas texel set to the mean known colour."""

    color_adjust = False

    def recover(self, request: RecoveryRequest, *, log: Optional[EventLog] = None) -> RecoveryResult:
        base = np.zeros_like(request.views[0])
        layers = list(zip(request.views, request.masks))
        texture, known = compose_edit(base, np.zeros(base.shape[:2], dtype=bool), layers)
        valid = atlas_mask(request.uv_size)
        fill = texture[known].mean(axis=0) if known.any() else np.full(3, 0.5)
        out = np.where((valid & ~known)[..., None], fill, texture).astype(np.float32)
        out = np.where(valid[..., None], out, np.float32(0.0))
        return RecoveryResult(texture=out, raw=out, color_adjusted=False)


class GroundTruthModel:
    """Oracle returning the held-out ground truth; measures the render/unwrap floor."""

    color_adjust = False

    def __init__(self, manifest: CorpusManifest) -> None:
        self.manifest = manifest

    def recover(self, request: RecoveryRequest, *, log: Optional[EventLog] = None) -> RecoveryResult:
        gt = load_ground_truth(self.manifest, self.manifest.record(request.sample_id))
        return RecoveryResult(texture=gt, raw=gt, color_adjusted=False)


@dataclass
class Evaluated:
    record: SampleRecord
    metrics: Optional[SampleMetrics] = None
    error: Optional[str] = None
    sheet_row: dict = field(default_factory=dict)


def render_recovered(record: SampleRecord, texture: np.ndarray, color_adjusted: bool, size: int) -> np.ndarray:
    frag = rasterize(build_mesh(record.true_params), record.true_scene, size)
    return render_texture(frag, texture, gain=UNIT_GAIN if color_adjusted else None)


def _evaluate_one(
    manifest: CorpusManifest, record: SampleRecord, model: RecoveryModel, config: RunConfig, log: EventLog
) -> Evaluated:
    try:
        sample = load_sample(manifest, record)
        gt = load_ground_truth(manifest, record)
        request = RecoveryRequest.from_sample(
            sample, config.sample, color_adjust=config.sample.color_adjust and model.color_adjust
        )
        result = model.recover(request, log=log)
        render = render_recovered(record, result.texture, result.color_adjusted, sample.I_w.shape[0])
        image = masked_metrics(render, sample.I_w, sample.M_I)
        uv = masked_metrics(result.texture, gt, atlas_mask(gt.shape[0]))
    except MissingFileError:
        raise
    except (UvforgeError, ValueError) as e:
        kind = getattr(e, "kind", "invalid")
        _logger.warning(f"Evaluation of {record.id} failed: {e}")
        log.emit("eval_failed", sample=record.id, error=kind, message=str(e))
        return Evaluated(record, error=f"{kind}: {e}")
    metrics = SampleMetrics(
        sample_id=record.id,
        image_rmse=image["rmse"],
        image_psnr=image["psnr"],
        image_ssim=image["ssim"],
        uv_rmse=uv["rmse"],
        uv_psnr=uv["psnr"],
        uv_ssim=uv["ssim"],
        clamped=result.clamped,
    )
    row = {
        "input": sample.image if sample.image is not None else sample.I_w,
        "T_w": sample.T_w,
        "recovered": result.texture,
        "render": render,
        "GT": gt,
    }
    return Evaluated(record, metrics=metrics, sheet_row=row)


def eval_records(manifest: CorpusManifest, config: RunConfig) -> list[SampleRecord]:
    records = manifest.split(config.eval.split)
    if not records:
        raise ValueError(f"corpus {manifest.root} has no {config.eval.split!r} samples")
    return records[: config.eval.limit] if config.eval.limit else records


def eval_recovery(
    manifest: CorpusManifest,
    model: RecoveryModel,
    config: RunConfig,
    *,
    label: str = "model",
    out_dir: Optional[PathLike] = None,
    log: Optional[EventLog] = None,
    threads: int = 1,
    fingerprint: Optional[str] = None,
) -> MetricsReport:
    """
    Recover, render and score every eval face.

    Args:
        manifest: corpus holding the eval split and its ground truth
        model: assembled model or baseline
        config: run config; ``sample`` drives the requests, ``eval`` selects the faces
        label: report name, also the file stem under ``out_dir``
        out_dir: when given, ``<label>.csv``, ``<label>.json`` and ``<label>_sheet.png`` are written
        threads: faces scored concurrently; results are ordered by the corpus

    Returns:
        the report; failed faces are excluded from the rows and listed under ``failures``
    """
    log = log or EventLog()
    records = eval_records(manifest, config)
    start = time.monotonic()
    _logger.info(f"Evaluating {label} on {len(records)} samples")
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        evaluated = list(pool.map(lambda r: _evaluate_one(manifest, r, model, config, log), records))
    report = MetricsReport(
        label=label,
        fingerprint=fingerprint or config_fingerprint(config),
        samples=[e.metrics for e in evaluated if e.metrics is not None],
        failures={e.record.id: e.error for e in evaluated if e.error is not None},
        runtime=time.monotonic() - start,
    )
    log.emit("eval_done", label=label, samples=len(report.samples), failed=len(report.failures), runtime=report.runtime)
    if out_dir is not None:
        report.write(out_dir, label)
        rows = [e.sheet_row for e in evaluated if e.metrics is not None][: config.eval.sheets]
        if rows:
            write_contact_sheet(Path(out_dir) / f"{label}_sheet.png", rows)
    return report


@dataclass
class TableResult:
    table: pd.DataFrame
    reports: dict[str, MetricsReport]
    checks: dict[str, bool] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)


def _row(name: str, report: MetricsReport, **extra) -> dict:
    means = report.summary()["mean"]
    return {"arm": name, **extra, "fingerprint": report.fingerprint, "samples": len(report.samples), **means}


def run_ablation_matrix(
    manifest: CorpusManifest,
    model_dir: PathLike,
    arms: Sequence[str],
    config: RunConfig,
    *,
    out_dir: Optional[PathLike] = None,
    log: Optional[EventLog] = None,
    threads: int = 1,
) -> TableResult:
    """
    Evaluate each named arm (``["all"]`` means the six table arms); arms whose checkpoints
    are missing are skipped with a notice.

    The mean-fill baseline runs on the same faces whenever an arm ran. The table is ranked
    by mean GT-UV RMSE. ``checks`` holds every expected ordering whose two arms both ran,
    plus the margin of the default arm over the baseline.
    """
    log = log or EventLog()
    names = list(TABLE_ARMS) if list(arms) == ["all"] else list(arms)
    reports: dict[str, MetricsReport] = {}
    rows, skipped = [], []
    for name in names:
        spec = resolve_arm(name)
        try:
            model = assemble(spec, model_dir)
        except MissingFileError as e:
            log.warn("arm_skipped", f"skipping arm {name}: {e}", arm=name, path=e.path)
            skipped.append(name)
            continue
        arm_config = config.model_copy(
            update={"sample": config.sample.model_copy(update={"color_adjust": spec.color_adjust})}
        )
        fingerprint = config_fingerprint({"config": arm_config.model_dump(mode="json"), "arm": spec.model_dump()})
        report = eval_recovery(
            manifest, model, arm_config, label=name, out_dir=out_dir, log=log, threads=threads, fingerprint=fingerprint
        )
        reports[name] = report
        extra = {"extractor": spec.extractor, "control": spec.control, "backbone": spec.backbone_source}
        rows.append(_row(name, report, **extra, color_adjust=spec.color_adjust))
    if reports:
        baseline = eval_recovery(
            manifest, MeanFillModel(), config, label=MEAN_FILL, out_dir=out_dir, log=log, threads=threads
        )
        reports[MEAN_FILL] = baseline
        rows.append(_row(MEAN_FILL, baseline, color_adjust=False))
    table = _ranked(rows)
    rmse = table.set_index("arm")[RANK_METRIC] if rows else pd.Series(dtype=float)
    checks = {
        f"{better} < {worse}": bool(rmse[better] < rmse[worse])
        for better, worse in ORDERING_CHECKS
        if better in reports and worse in reports
    }
    if DEFAULT_ARM in reports:
        margin = f"{DEFAULT_ARM} <= {BASELINE_MARGIN:g} * {MEAN_FILL}"
        checks[margin] = bool(rmse[DEFAULT_ARM] <= BASELINE_MARGIN * rmse[MEAN_FILL])
    for check, passed in checks.items():
        log.emit("ordering_check", check=check, passed=passed, metric=RANK_METRIC)
    result = TableResult(table=table, reports=reports, checks=checks, skipped=skipped)
    if out_dir is not None:
        _write_table(result, Path(out_dir), "ablation")
    return result


def _view_rmse(
    manifest: CorpusManifest, record: SampleRecord, model: RecoveryModel, config: RunConfig, log: EventLog
) -> Optional[list[float]]:
    try:
        sample = load_sample(manifest, record)
        gt = load_ground_truth(manifest, record)
        bands = split_views(sample.T_w, sample.M_T, 2)
        if len(bands) < 2:
            log.warn("view_check_skipped", f"{record.id} has fewer than two non-empty views", sample=record.id)
            return None
        request = RecoveryRequest.from_sample(
            sample, config.sample, color_adjust=config.sample.color_adjust and model.color_adjust
        )
        valid = atlas_mask(gt.shape[0])
        out = []
        for chosen in ([bands[0]], [bands[1]], bands):
            partial = request.model_copy(update={"views": [v for v, _ in chosen], "masks": [m for _, m in chosen]})
            out.append(masked_rmse(model.recover(partial, log=log).texture, gt, valid))
        return out
    except MissingFileError:
        raise
    except (UvforgeError, ValueError) as e:
        kind = getattr(e, "kind", "invalid")
        _logger.warning(f"View check of {record.id} failed: {e}")
        log.emit("eval_failed", sample=record.id, error=kind, message=str(e))
        return None


def run_view_check(
    manifest: CorpusManifest,
    model: RecoveryModel,
    config: RunConfig,
    *,
    out_dir: Optional[PathLike] = None,
    log: Optional[EventLog] = None,
    threads: int = 1,
) -> TableResult:
    """
    Recover every eval face from each half of its unwrap and from both halves together.

    The table holds the mean GT-UV RMSE per condition; the single check asks whether two
    complementary views do at least as well as the better single view.
    """
    log = log or EventLog()
    records = eval_records(manifest, config)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        scored = list(pool.map(lambda r: _view_rmse(manifest, r, model, config, log), records))
    kept = np.array([s for s in scored if s is not None], dtype=np.float64).reshape(-1, len(VIEW_CONDITIONS))
    means = kept.mean(axis=0) if len(kept) else np.full(len(VIEW_CONDITIONS), np.nan)
    table = pd.DataFrame({"condition": VIEW_CONDITIONS, "samples": len(kept), "uv_rmse": means})
    checks = {}
    if len(kept):
        checks["two views <= min(single view)"] = bool(means[2] <= min(means[0], means[1]))
    for check, passed in checks.items():
        log.emit("view_check", check=check, passed=passed, **dict(zip(VIEW_CONDITIONS, means.tolist())))
    skipped = [r.id for r, s in zip(records, scored) if s is None]
    result = TableResult(table=table, reports={}, checks=checks, skipped=skipped)
    if out_dir is not None:
        _write_table(result, Path(out_dir), "views")
    return result


def run_guidance_sweep(
    manifest: CorpusManifest,
    model: InferenceModel,
    config: RunConfig,
    scales: Sequence[float] = DEFAULT_GUIDANCE_SCALES,
    *,
    out_dir: Optional[PathLike] = None,
    log: Optional[EventLog] = None,
    threads: int = 1,
) -> TableResult:
    """One report per guidance scale, everything else fixed."""
    reports: dict[str, MetricsReport] = {}
    rows = []
    for scale in scales:
        label = f"guidance_{scale:g}"
        scaled = config.model_copy(update={"sample": config.sample.model_copy(update={"guidance": float(scale)})})
        report = eval_recovery(manifest, model, scaled, label=label, out_dir=out_dir, log=log, threads=threads)
        reports[label] = report
        rows.append(_row(label, report, guidance=float(scale)))
    result = TableResult(table=pd.DataFrame(rows), reports=reports)
    if out_dir is not None:
        _write_table(result, Path(out_dir), "guidance")
    return result


def _ranked(rows: list[dict]) -> pd.DataFrame:
    if not rows:
        return pd.DataFrame(columns=["arm", "fingerprint", "samples", *METRIC_COLUMNS])
    table = pd.DataFrame(rows).sort_values(RANK_METRIC, kind="stable").reset_index(drop=True)
    table.insert(0, "rank", range(1, len(table) + 1))
    return table


def _write_table(result: TableResult, out_dir: Path, stem: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    result.table.to_csv(out_dir / f"{stem}.csv", index=False, float_format="%.6g")
    summary = {"checks": result.checks, "skipped": result.skipped, "rows": result.table.to_dict(orient="records")}
    (out_dir / f"{stem}.json").write_text(json.dumps(jsonable(summary), indent=2, sort_keys=True) + "\n")


def evaluate_arm(
    manifest: CorpusManifest,
    model_dir: PathLike,
    arm: Union[str, None],
    config: RunConfig,
    **kwargs,
) -> MetricsReport:
    """eval_recovery on one assembled arm (the default arm when ``arm`` is None)."""
    name = arm or DEFAULT_ARM
    return eval_recovery(manifest, assemble(resolve_arm(name), model_dir), config, label=name, **kwargs)
