"""Evaluation reports, metric tables and deterministic SVG plots."""

from glucokit.report.plots import (
    render_scatter, render_single_prediction, render_trajectories, trajectory_points,
)
from glucokit.report.tables import (
    COLUMNS, GLUCOSE_COLUMNS, EvaluationReport, TableFormat, evaluate, metrics_table,
)

__all__ = [
    "EvaluationReport", "TableFormat", "evaluate", "metrics_table", "COLUMNS", "GLUCOSE_COLUMNS",
    "render_scatter", "render_trajectories", "render_single_prediction", "trajectory_points",
]
