"""glucokit: blood-glucose forecasting from CGM, insulin, meal and heart-rate logs.

Parse a source into a regular-grid ``DatasetFrame``, turn it into a supervised
set, fit one of the registered learners per horizon step, then score the
trajectories with scalar metrics, gsRMSE and Clarke/Parkes error grids.
"""

from glucokit.core import (
    BASAL, BOLUS, CARBS, CGM, HEARTRATE, MGDL_PER_MMOLL, SIGNALS, DatasetFrame, EventKind, EventRecord,
    GlucoseUnit, PipelineConfig, Scaling, convert_glucose, validate_frame,
)
from glucokit.errors import GlucokitError
from glucokit.metrics import PairedSeries, error_grid, gs_rmse, scalar_metrics
from glucokit.models import ModelSpec, TrainedModel, available_models, fit, load_model, predict, save_model
from glucokit.parsers import SourceDescriptor, SourceKind, load_frame, merge_to_frame
from glucokit.preprocess import SupervisedSet, featurize, impute, prepare, split
from glucokit.report import evaluate, metrics_table

__version__ = "0.1.0"

__all__ = [
    "BASAL", "BOLUS", "CARBS", "CGM", "HEARTRATE", "MGDL_PER_MMOLL", "SIGNALS",
    "DatasetFrame", "EventKind", "EventRecord", "GlucoseUnit", "PipelineConfig", "Scaling",
    "convert_glucose", "validate_frame", "GlucokitError",
    "PairedSeries", "error_grid", "gs_rmse", "scalar_metrics",
    "ModelSpec", "TrainedModel", "available_models", "fit", "load_model", "predict", "save_model",
    "SourceDescriptor", "SourceKind", "load_frame", "merge_to_frame",
    "SupervisedSet", "featurize", "impute", "prepare", "split",
    "evaluate", "metrics_table",
]
