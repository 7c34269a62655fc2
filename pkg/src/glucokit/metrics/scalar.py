from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from glucokit.core import CGM_MAX_MGDL, CGM_MIN_MGDL
from glucokit.errors import InvalidValueError


@dataclass(frozen=True, eq=False)
class PairedSeries:
    """Reference CGM and predicted glucose, both mg/dL."""

    reference: np.ndarray
    predicted: np.ndarray

    def __post_init__(self):
        r = np.array(self.reference, dtype=np.float64, copy=True).reshape(-1)
        p = np.array(self.predicted, dtype=np.float64, copy=True).reshape(-1)
        if r.shape != p.shape:
            raise InvalidValueError(f"reference and predicted lengths differ ({len(r)} vs {len(p)})")
        if len(r) == 0:
            raise InvalidValueError("paired series is empty")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(p))):
            raise InvalidValueError("paired series contains non-finite values")
        if np.any((r < CGM_MIN_MGDL) | (r > CGM_MAX_MGDL)):
            raise InvalidValueError(f"reference values must lie in [{CGM_MIN_MGDL:g}, {CGM_MAX_MGDL:g}] mg/dL")
        r.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "reference", r)
        object.__setattr__(self, "predicted", p)

    def __len__(self):
        return len(self.reference)


@dataclass(frozen=True)
class ScalarMetrics:
    rmse: float
    mae: float
    mard: float   # percent
    me: float
    mre: float    # percent


def scalar_metrics(pairs: PairedSeries) -> ScalarMetrics:
    r, p = pairs.reference, pairs.predicted
    err = p - r
    return ScalarMetrics(
        rmse=float(np.sqrt(np.mean(err ** 2))),
        mae=float(np.mean(np.abs(err))),
        mard=float(100.0 * np.mean(np.abs(err) / r)),
        me=float(np.mean(err)),
        mre=float(100.0 * np.mean(err / r)),
    )
