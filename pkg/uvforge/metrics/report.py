"""
Evaluation reports: one CSV row per sample plus a JSON summary.

PSNR of identical inputs is +inf; both files spell it ``inf``. Runtime is kept on the
in-memory report and in the event log but not in the files, so reruns are byte-identical.
"""

import json
import math
from os import PathLike
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

METRIC_COLUMNS = ["image_rmse", "image_psnr", "image_ssim", "uv_rmse", "uv_psnr", "uv_ssim"]


class SampleMetrics(BaseModel):
    sample_id: str
    image_rmse: float = Field(description="Render through the true scene vs I_w, over M_I.")
    image_psnr: float
    image_ssim: float
    uv_rmse: float = Field(description="Recovered texture vs ground truth, over the atlas mask.")
    uv_psnr: float
    uv_ssim: float
    clamped: int = Field(default=0, description="Channel values clipped by colour adjustment.")


class MetricsReport(BaseModel):
    label: str = Field(description="Arm or baseline name.")
    fingerprint: str = Field(description="Fingerprint of the resolved config that produced the report.")
    samples: list[SampleMetrics] = Field(default_factory=list)
    failures: dict[str, str] = Field(default_factory=dict, description="Excluded samples and their error.")
    runtime: float = Field(default=0.0, description="Seconds spent; not written to the report files.")

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame([s.model_dump() for s in self.samples], columns=["sample_id", *METRIC_COLUMNS, "clamped"])

    def summary(self) -> dict[str, Any]:
        """Means over samples; PSNR is averaged over finite values only."""
        means: dict[str, Any] = {}
        frame = self.frame()
        for col in METRIC_COLUMNS:
            values = frame[col].to_numpy(dtype=np.float64)
            if col.endswith("psnr") and len(values) and np.isinf(values).all():
                means[col] = math.inf
                continue
            finite = values[np.isfinite(values)]
            means[col] = float(finite.mean()) if finite.size else math.nan
        return {
            "label": self.label,
            "fingerprint": self.fingerprint,
            "samples": len(self.samples),
            "failed": len(self.failures),
            "failures": dict(sorted(self.failures.items())),
            "mean": means,
        }

    def write(self, out_dir: PathLike, stem: Optional[str] = None) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = stem or self.label
        csv_path = out_dir / f"{stem}.csv"
        json_path = out_dir / f"{stem}.json"
        self.frame().to_csv(csv_path, index=False, float_format="%.6g")
        json_path.write_text(json.dumps(jsonable(self.summary()), indent=2, sort_keys=True) + "\n")
        return csv_path, json_path


def jsonable(value: Any) -> Any:
    """Replace non-finite floats with the strings ``inf``, ``-inf`` and ``nan``."""
    if isinstance(value, dict):
        return {k: jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return jsonable(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return value
