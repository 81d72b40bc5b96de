from .evaluate import (
    BASELINE_MARGIN,
    DEFAULT_GUIDANCE_SCALES,
    ORDERING_CHECKS,
    GroundTruthModel,
    MeanFillModel,
    RecoveryModel,
    TableResult,
    eval_recovery,
    evaluate_arm,
    render_recovered,
    run_ablation_matrix,
    run_guidance_sweep,
    run_view_check,
)
from .quality import masked_metrics, masked_rmse, masked_ssim, psnr_from_rmse
from .report import METRIC_COLUMNS, MetricsReport, SampleMetrics, jsonable
from .sheets import SHEET_COLUMNS, contact_sheet, write_contact_sheet

__all__ = [
    "BASELINE_MARGIN",
    "DEFAULT_GUIDANCE_SCALES",
    "ORDERING_CHECKS",
    "GroundTruthModel",
    "MeanFillModel",
    "RecoveryModel",
    "TableResult",
    "eval_recovery",
    "evaluate_arm",
    "render_recovered",
    "run_ablation_matrix",
    "run_guidance_sweep",
    "run_view_check",
    "masked_metrics",
    "masked_rmse",
    "masked_ssim",
    "psnr_from_rmse",
    "METRIC_COLUMNS",
    "MetricsReport",
    "SampleMetrics",
    "jsonable",
    "SHEET_COLUMNS",
    "contact_sheet",
    "write_contact_sheet",
]
