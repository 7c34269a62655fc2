"""Scalar error metrics, glucose-specific RMSE and clinical error grids."""

from glucokit.metrics.error_grids import (
    ZONES, ErrorGridResult, GridKind, clarke_zones, error_grid, parkes_zones,
)
from glucokit.metrics.gsrmse import NO_PENALTY, GlucosePenalty, gs_rmse, smooth_step
from glucokit.metrics.scalar import PairedSeries, ScalarMetrics, scalar_metrics

__all__ = [
    "PairedSeries", "ScalarMetrics", "scalar_metrics", "gs_rmse", "GlucosePenalty", "NO_PENALTY",
    "smooth_step", "GridKind", "ErrorGridResult", "error_grid", "clarke_zones", "parkes_zones", "ZONES",
]
