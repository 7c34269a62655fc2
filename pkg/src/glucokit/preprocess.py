"""Imputation, supervised featurization, chronological splitting and scaling."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from datetime import datetime

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from glucokit.core import BOLUS, CARBS, CGM, DatasetFrame, PipelineConfig, Scaling
from glucokit.errors import EmptySetError, InsufficientDataError, SchemaError

ZERO_FILLED = (BOLUS, CARBS)


@dataclass(frozen=True, eq=False)
class SupervisedSet:
    features: np.ndarray          # n_samples x n_features
    targets: np.ndarray           # n_samples x H, CGM mg/dL
    sample_timestamps: tuple[datetime, ...]
    feature_names: tuple[str, ...]
    origins: np.ndarray           # frame index of each sample's time t

    def __post_init__(self):
        for name in ("features", "targets", "origins"):
            arr = np.array(getattr(self, name), copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "sample_timestamps", tuple(self.sample_timestamps))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if len(set(self.feature_names)) != len(self.feature_names):
            raise SchemaError("feature names must be unique")
        if self.features.ndim != 2 or self.features.shape[1] != len(self.feature_names):
            raise SchemaError("feature matrix width does not match feature_names")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def horizon_steps(self) -> int:
        return self.targets.shape[1]

    def take(self, idx) -> "SupervisedSet":
        idx = np.asarray(idx)
        return SupervisedSet(self.features[idx], self.targets[idx],
                             tuple(self.sample_timestamps[i] for i in idx),
                             self.feature_names, self.origins[idx])


@dataclass(frozen=True, eq=False)
class ScalerParams:
    mean: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        for name in ("mean", "scale"):
            arr = np.array(getattr(self, name), dtype=np.float64, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if np.any(self.scale <= 0):
            raise ValueError("scaler scale must be positive")

    @classmethod
    def identity(cls, width: int) -> "ScalerParams":
        return cls(np.zeros(width), np.ones(width))


def impute(frame: DatasetFrame, max_gap_minutes: int) -> DatasetFrame:
    """Fill short interior gaps linearly; bolus and carbs gaps become 0.

    Runs longer than ``max_gap_minutes`` and leading/trailing gaps stay
    missing. Present values are never modified.
    """
    max_run = max_gap_minutes // frame.interval_minutes
    cols = {}
    for name, col in frame.columns.items():
        col = col.copy()
        miss = np.isnan(col)
        if name in ZERO_FILLED:
            col[miss] = 0.0
        elif miss.any() and max_run > 0:
            present = np.flatnonzero(~miss)
            for left, right in zip(present[:-1], present[1:]):
                run = right - left - 1
                if 0 < run <= max_run:
                    frac = np.arange(1, run + 1) / (run + 1)
                    col[left + 1:right] = col[left] + (col[right] - col[left]) * frac
        cols[name] = col
    return frame.replace_columns(cols)


def _fmt_offset(k: int) -> str:
    return f"t-{-k}" if k <= 0 else f"t+{k}"


def feature_names_for(config: PipelineConfig) -> tuple[str, ...]:
    L, H = config.num_lagged_samples, config.horizon_steps
    names = [f"{s}[{_fmt_offset(-k)}]" for s in config.feature_signals for k in range(L - 1, -1, -1)]
    names += [f"{s}[{_fmt_offset(k)}]" for s in config.what_if_signals for k in range(1, H + 1)]
    return tuple(names)


def featurize(frame: DatasetFrame, config: PipelineConfig) -> SupervisedSet:
    """Build lagged (and what-if) features with CGM trajectories as targets.

    For each origin ``t``: every feature signal at ``t-L+1 .. t``, every
    what-if signal at ``t+1 .. t+H``; targets are CGM at ``t+1 .. t+H``.
    Samples touching a missing bin are dropped.
    """
    L, H = config.num_lagged_samples, config.horizon_steps
    n = len(frame)
    if frame.interval_minutes != config.interval_minutes:
        raise SchemaError(f"frame interval {frame.interval_minutes} min does not match "
                          f"configured {config.interval_minutes} min")
    missing = [s for s in config.feature_signals if s not in frame]
    if missing:
        raise SchemaError(f"frame lacks configured feature signals: {missing}")
    if n < L + H:
        raise EmptySetError(f"frame has {n} bins but at least {L + H} "
                            f"(lookback {L} + horizon {H}) are required")
    origins = np.arange(L - 1, n - H)

    blocks = []
    for s in config.feature_signals:
        win = sliding_window_view(frame[s], L)          # win[j] = s[j .. j+L-1]
        blocks.append(win[origins - L + 1])
    for s in config.what_if_signals:
        win = sliding_window_view(frame[s], H)
        blocks.append(win[origins + 1])
    X = np.hstack(blocks) if blocks else np.empty((len(origins), 0))
    Y = sliding_window_view(frame[CGM], H)[origins + 1]

    keep = ~(np.isnan(X).any(axis=1) | np.isnan(Y).any(axis=1))
    origins = origins[keep]
    if not len(origins):
        raise EmptySetError("no complete samples after dropping those with missing values")
    stamps = tuple(frame.timestamp(i) for i in origins)
    return SupervisedSet(X[keep], Y[keep], stamps, feature_names_for(config), origins)


def split(data: SupervisedSet, test_fraction: float) -> tuple[SupervisedSet, SupervisedSet]:
    """Chronological split: the first ceil(n * (1 - f)) samples train, the rest test."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test_fraction must lie in (0, 1), got {test_fraction!r}")
    n = len(data)
    if n < 2:
        raise InsufficientDataError(f"need at least 2 samples to split, got {n}")
    # ceil(n(1-f)) == n - floor(nf); the epsilon absorbs float noise in n*f
    n_train = n - math.floor(n * test_fraction + 1e-9)
    n_train = min(max(n_train, 1), n - 1)
    order = np.arange(n)
    return data.take(order[:n_train]), data.take(order[n_train:])


def scaler_fit(train: SupervisedSet) -> ScalerParams:
    """Per-feature mean and population standard deviation; constant columns get scale 1."""
    if len(train) == 0:
        raise InsufficientDataError("cannot fit a scaler on an empty set")
    X = train.features
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    constant = std <= 1e-12 * np.maximum(1.0, np.abs(mean))
    return ScalerParams(mean, np.where(constant, 1.0, std))


def scaler_apply(params: ScalerParams, data: SupervisedSet) -> SupervisedSet:
    return replace(data, features=(data.features - params.mean) / params.scale)


@dataclass(frozen=True, eq=False)
class PreparedData:
    frame: DatasetFrame           # imputed frame
    train: SupervisedSet          # unscaled
    test: SupervisedSet           # unscaled
    scaler: ScalerParams


def prepare(frame: DatasetFrame, config: PipelineConfig) -> PreparedData:
    """impute -> featurize -> split -> fit scaler (on train only)."""
    imputed = impute(frame, config.imputation_max_gap_minutes)
    data = featurize(imputed, config)
    train, test = split(data, config.test_fraction)
    if config.scaling is Scaling.STANDARDIZE:
        scaler = scaler_fit(train)
    else:
        scaler = ScalerParams.identity(train.features.shape[1])
    return PreparedData(imputed, train, test, scaler)
