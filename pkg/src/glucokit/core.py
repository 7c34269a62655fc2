"""Canonical domain types, glucose units, configuration schema and frame validation."""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from glucokit.errors import ConfigError, InvalidValueError

# mg/dL per mmol/L. Pinned once; every conversion in the package goes through it.
MGDL_PER_MMOLL = 18.0182

CGM_MIN_MGDL = 10.0
CGM_MAX_MGDL = 600.0

CGM = "CGM"
BOLUS = "bolus"
BASAL = "basal_delivered"
CARBS = "carbs"
HEARTRATE = "heartrate"
SIGNALS = (CGM, BOLUS, BASAL, CARBS, HEARTRATE)


class GlucoseUnit(enum.Enum):
    MGDL = "mg/dL"
    MMOLL = "mmol/L"

    @classmethod
    def parse(cls, text: str | "GlucoseUnit") -> "GlucoseUnit":
        if isinstance(text, GlucoseUnit):
            return text
        key = str(text).strip().lower().replace(" ", "")
        aliases = {
            "mg/dl": cls.MGDL, "mgdl": cls.MGDL,
            "mmol/l": cls.MMOLL, "mmoll": cls.MMOLL, "mmol": cls.MMOLL,
        }
        try:
            return aliases[key]
        except KeyError:
            raise InvalidValueError(f"unknown glucose unit {text!r}; expected 'mg/dL' or 'mmol/L'") from None


def convert_glucose(value: float, from_unit: GlucoseUnit, to_unit: GlucoseUnit) -> float:
    """Convert a glucose value between mg/dL and mmol/L."""
    value = float(value)
    if not math.isfinite(value):
        raise InvalidValueError(f"glucose value must be finite, got {value!r}")
    if from_unit is to_unit:
        return value
    if from_unit is GlucoseUnit.MMOLL:
        return value * MGDL_PER_MMOLL
    return value / MGDL_PER_MMOLL


class EventKind(enum.Enum):
    CGM = "CGM"
    BOLUS = "BOLUS"
    BASAL = "BASAL"
    CARBS = "CARBS"
    HEARTRATE = "HEARTRATE"


def as_utc(ts: datetime) -> datetime:
    """Normalise to an aware UTC datetime truncated to whole seconds."""
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    else:
        ts = ts.astimezone(timezone.utc)
    return ts.replace(microsecond=0)


@dataclass(frozen=True, order=True)
class EventRecord:
    timestamp: datetime
    kind: EventKind
    value: float
    duration_minutes: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "timestamp", as_utc(self.timestamp))
        value = float(self.value)
        object.__setattr__(self, "value", value)
        if not math.isfinite(value) or value < 0:
            raise InvalidValueError(f"{self.kind.value} value must be finite and >= 0, got {value!r}")
        if self.kind is EventKind.CGM and not CGM_MIN_MGDL <= value <= CGM_MAX_MGDL:
            raise InvalidValueError(
                f"CGM value {value} mg/dL outside [{CGM_MIN_MGDL:g}, {CGM_MAX_MGDL:g}]")
        if self.duration_minutes is not None:
            if self.kind is not EventKind.BASAL:
                raise InvalidValueError("duration_minutes is only allowed on BASAL records")
            d = float(self.duration_minutes)
            if not math.isfinite(d) or d < 0:
                raise InvalidValueError(f"duration_minutes must be finite and >= 0, got {d!r}")
            object.__setattr__(self, "duration_minutes", d)

    def sort_key(self):
        return (self.timestamp, self.kind.value, self.value, self.duration_minutes or -1.0)


def sort_records(records: Sequence[EventRecord]) -> list[EventRecord]:
    return sorted(records, key=EventRecord.sort_key)


@dataclass(frozen=True, eq=False)
class DatasetFrame:
    """Uniformly gridded multi-signal series; NaN marks a missing bin.

    Values are always stored in mg/dL (CGM), U (bolus, basal_delivered),
    g (carbs) and bpm (heartrate). Timestamps are implicit:
    ``start + i * interval_minutes``.
    """

    start: datetime
    interval_minutes: int
    columns: Mapping[str, np.ndarray]

    def __post_init__(self):
        object.__setattr__(self, "start", as_utc(self.start))
        cols = {}
        for name in sorted(self.columns, key=_column_order):
            arr = np.array(self.columns[name], dtype=np.float64, copy=True).reshape(-1)
            arr.setflags(write=False)
            cols[name] = arr
        object.__setattr__(self, "columns", cols)

    def __len__(self) -> int:
        if not self.columns:
            return 0
        return len(next(iter(self.columns.values())))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __contains__(self, name: str) -> bool:
        return name in self.columns

    def missing(self, name: str) -> np.ndarray:
        return np.isnan(self.columns[name])

    def timestamp(self, i: int) -> datetime:
        return self.start + timedelta(minutes=self.interval_minutes * int(i))

    @property
    def timestamps(self) -> list[datetime]:
        return [self.timestamp(i) for i in range(len(self))]

    def replace_columns(self, columns: Mapping[str, np.ndarray]) -> "DatasetFrame":
        return DatasetFrame(self.start, self.interval_minutes, columns)

    def slice(self, lo: int, hi: int) -> "DatasetFrame":
        return DatasetFrame(self.timestamp(lo), self.interval_minutes,
                            {k: v[lo:hi] for k, v in self.columns.items()})

    def equals(self, other: "DatasetFrame") -> bool:
        """Exact equality; missing bins compare equal to each other."""
        if self.start != other.start or self.interval_minutes != other.interval_minutes:
            return False
        if list(self.columns) != list(other.columns):
            return False
        return all(np.array_equal(self.columns[k], other.columns[k], equal_nan=True)
                   for k in self.columns)


def _column_order(name: str):
    return (SIGNALS.index(name) if name in SIGNALS else len(SIGNALS), name)


@dataclass(frozen=True)
class Violation:
    message: str
    column: Optional[str] = None
    index: Optional[int] = None


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_frame(frame: DatasetFrame) -> ValidationReport:
    """Check every DatasetFrame invariant and list the violations found."""
    out: list[Violation] = []
    if not isinstance(frame.interval_minutes, (int, np.integer)) or frame.interval_minutes <= 0:
        out.append(Violation(f"interval_minutes must be a positive integer, got {frame.interval_minutes!r}"))
    if CGM not in frame.columns:
        out.append(Violation("required column missing", column=CGM))
    lengths = {name: len(col) for name, col in frame.columns.items()}
    if len(set(lengths.values())) > 1:
        out.append(Violation(f"columns have unequal lengths: {lengths}"))
    if not lengths or max(lengths.values()) == 0:
        out.append(Violation("empty frame"))
    for name, col in frame.columns.items():
        for i in np.flatnonzero(np.isinf(col)):
            out.append(Violation("non-finite value", column=name, index=int(i)))
        if name == CGM:
            present = ~np.isnan(col) & np.isfinite(col)
            bad = present & ((col < CGM_MIN_MGDL) | (col > CGM_MAX_MGDL))
            for i in np.flatnonzero(bad):
                out.append(Violation(f"CGM value {col[i]:g} outside [{CGM_MIN_MGDL:g}, {CGM_MAX_MGDL:g}] mg/dL",
                                     column=name, index=int(i)))
    return ValidationReport(tuple(out))


class Scaling(enum.Enum):
    NONE = "NONE"
    STANDARDIZE = "STANDARDIZE"


CONFIG_VERSION = 1

_CONFIG_FIELDS = (
    "config_version", "data_file", "subject_id", "interval_minutes",
    "prediction_horizon_minutes", "num_lagged_samples", "feature_signals",
    "what_if_signals", "test_fraction", "imputation_max_gap_minutes", "scaling",
    "model_specs", "unit", "random_seed",
)


@dataclass(frozen=True)
class PipelineConfig:
    data_file: str
    subject_id: Optional[str] = None
    interval_minutes: int = 5
    prediction_horizon_minutes: int = 120
    num_lagged_samples: int = 12
    feature_signals: tuple[str, ...] = (CGM,)
    what_if_signals: tuple[str, ...] = ()
    test_fraction: float = 0.25
    imputation_max_gap_minutes: int = 30
    scaling: Scaling = Scaling.STANDARDIZE
    model_specs: tuple[tuple[str, Mapping[str, Any]], ...] = ()
    unit: GlucoseUnit = GlucoseUnit.MGDL
    random_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "feature_signals", tuple(self.feature_signals))
        object.__setattr__(self, "what_if_signals", tuple(self.what_if_signals))
        object.__setattr__(self, "scaling", Scaling(self.scaling) if not isinstance(self.scaling, Scaling)
                           else self.scaling)
        object.__setattr__(self, "unit", GlucoseUnit.parse(self.unit))
        object.__setattr__(self, "model_specs",
                           tuple((str(n), dict(h)) for n, h in self.model_specs))
        self._validate()

    def _validate(self):
        def positive_int(name):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")

        positive_int("interval_minutes")
        positive_int("prediction_horizon_minutes")
        positive_int("num_lagged_samples")
        if self.prediction_horizon_minutes % self.interval_minutes:
            raise ConfigError("prediction_horizon_minutes must be a multiple of interval_minutes")
        if not isinstance(self.imputation_max_gap_minutes, int) or self.imputation_max_gap_minutes < 0:
            raise ConfigError("imputation_max_gap_minutes must be a non-negative integer")
        if not 0.0 < float(self.test_fraction) < 1.0:
            raise ConfigError(f"test_fraction must lie in (0, 1), got {self.test_fraction!r}")
        if isinstance(self.random_seed, bool) or not isinstance(self.random_seed, int):
            raise ConfigError("random_seed must be an integer")
        for s in self.feature_signals:
            if s not in SIGNALS:
                raise ConfigError(f"unknown feature signal {s!r}; known: {', '.join(SIGNALS)}")
        if len(set(self.feature_signals)) != len(self.feature_signals):
            raise ConfigError("feature_signals contains duplicates")
        if CGM not in self.feature_signals:
            raise ConfigError("feature_signals must include CGM")
        if CGM in self.what_if_signals:
            raise ConfigError("CGM cannot be a what-if signal")
        extra = [s for s in self.what_if_signals if s not in self.feature_signals]
        if extra:
            raise ConfigError(f"what-if signals not among feature_signals: {extra}")
        if len(set(self.what_if_signals)) != len(self.what_if_signals):
            raise ConfigError("what_if_signals contains duplicates")

    @property
    def horizon_steps(self) -> int:
        return self.prediction_horizon_minutes // self.interval_minutes

    def to_dict(self) -> dict:
        return {
            "config_version": CONFIG_VERSION,
            "data_file": self.data_file,
            "subject_id": self.subject_id,
            "interval_minutes": self.interval_minutes,
            "prediction_horizon_minutes": self.prediction_horizon_minutes,
            "num_lagged_samples": self.num_lagged_samples,
            "feature_signals": list(self.feature_signals),
            "what_if_signals": list(self.what_if_signals),
            "test_fraction": self.test_fraction,
            "imputation_max_gap_minutes": self.imputation_max_gap_minutes,
            "scaling": self.scaling.value,
            "model_specs": [{"name": n, "hyperparameters": dict(sorted(h.items()))}
                            for n, h in self.model_specs],
            "unit": self.unit.value,
            "random_seed": self.random_seed,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PipelineConfig":
        unknown = set(data) - set(_CONFIG_FIELDS)
        if unknown:
            raise ConfigError(f"unknown configuration fields: {sorted(unknown)}")
        if data.get("config_version") != CONFIG_VERSION:
            raise ConfigError(f"unsupported config_version {data.get('config_version')!r}")
        kwargs = {k: v for k, v in data.items() if k != "config_version"}
        specs = []
        for item in kwargs.pop("model_specs", []):
            if not isinstance(item, Mapping) or set(item) != {"name", "hyperparameters"}:
                raise ConfigError(f"malformed model spec entry: {item!r}")
            specs.append((item["name"], item["hyperparameters"]))
        try:
            return cls(model_specs=tuple(specs), **kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"configuration is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        return cls.from_dict(data)

    def content_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
