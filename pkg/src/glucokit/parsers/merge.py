"""Merge heterogeneous event streams onto a uniform time grid."""

from __future__ import annotations

from typing import Iterable

import numpy as np

from glucokit.core import (
    BASAL, BOLUS, CARBS, CGM, HEARTRATE, DatasetFrame, EventKind, EventRecord, sort_records,
)
from glucokit.errors import EmptySourceError, InvalidParameterError

_SUMMED = {EventKind.BOLUS: BOLUS, EventKind.CARBS: CARBS}
_AVERAGED = {EventKind.CGM: CGM, EventKind.HEARTRATE: HEARTRATE}


def basal_delivered(rate_u_per_hr, interval_minutes: int):
    """Units delivered over one bin at a constant rate (U/hr)."""
    return rate_u_per_hr * interval_minutes / 60


def basal_rate_for(delivered: float, interval_minutes: int) -> float:
    """Inverse of :func:`basal_delivered` that survives the float round trip.

    Searches a few ulps around the naive inverse for a rate whose forward
    conversion reproduces ``delivered`` bit for bit.
    """
    guess = delivered * 60 / interval_minutes
    candidates = [guess]
    lo = hi = guess
    for _ in range(8):
        lo = float(np.nextafter(lo, -np.inf))
        hi = float(np.nextafter(hi, np.inf))
        candidates += [lo, hi]
    for rate in candidates:
        if basal_delivered(rate, interval_minutes) == delivered:
            return rate
    return guess


def merge_to_frame(records: Iterable[EventRecord], interval_minutes: int = 5) -> DatasetFrame:
    """Aggregate records into a DatasetFrame spanning the first to last CGM reading.

    Bins are half-open ``[t, t + interval)``. Per bin, CGM and heart rate are
    averaged, bolus and carbs summed, and basal is the rate active at the bin
    start converted to delivered units. A signal with no observation in a
    bin is NaN there; a signal with no records at all gets no column.
    """
    if isinstance(interval_minutes, bool) or not isinstance(interval_minutes, int) or interval_minutes <= 0:
        raise InvalidParameterError(f"interval_minutes must be a positive integer, got {interval_minutes!r}")
    records = sort_records(list(records))
    cgm_times = [r.timestamp for r in records if r.kind is EventKind.CGM]
    if not cgm_times:
        raise EmptySourceError("no CGM records to build a frame from")
    start = cgm_times[0]
    step_s = interval_minutes * 60
    n = int((cgm_times[-1] - start).total_seconds()) // step_s + 1

    def bin_of(r: EventRecord) -> int:
        return int((r.timestamp - start).total_seconds()) // step_s

    columns: dict[str, np.ndarray] = {}
    kinds_present = {r.kind for r in records}
    for kind, name in {**_AVERAGED, **_SUMMED}.items():
        if kind not in kinds_present:
            continue
        pairs = [(bin_of(r), r.value) for r in records if r.kind is kind]
        pairs = [(b, v) for b, v in pairs if 0 <= b < n]
        idx = np.array([b for b, _ in pairs], dtype=np.int64)
        vals = np.array([v for _, v in pairs], dtype=np.float64)
        total = np.bincount(idx, weights=vals, minlength=n) if len(idx) else np.zeros(n)
        count = np.bincount(idx, minlength=n) if len(idx) else np.zeros(n, dtype=np.int64)
        col = np.full(n, np.nan)
        has = count > 0
        col[has] = total[has] / count[has] if kind in _AVERAGED else total[has]
        columns[name] = col

    if EventKind.BASAL in kinds_present:
        columns[BASAL] = _basal_column(
            [r for r in records if r.kind is EventKind.BASAL], start, n, interval_minutes)

    return DatasetFrame(start, interval_minutes, columns)


def _basal_column(segments: list[EventRecord], start, n: int, interval_minutes: int) -> np.ndarray:
    # Scheduled segments (no duration) persist until the next scheduled one;
    # timed segments override the schedule while they last.
    step_s = interval_minutes * 60
    scheduled = [(int((r.timestamp - start).total_seconds()), r.value)
                 for r in segments if r.duration_minutes is None]
    timed = [(int((r.timestamp - start).total_seconds()),
              int((r.timestamp - start).total_seconds()) + r.duration_minutes * 60, r.value)
             for r in segments if r.duration_minutes is not None]
    out = np.full(n, np.nan)
    si = 0
    current = None
    for i in range(n):
        t = i * step_s
        while si < len(scheduled) and scheduled[si][0] <= t:
            current = scheduled[si][1]
            si += 1
        rate = current
        for begin, end, value in timed:
            if begin > t:
                break
            if t < end:
                rate = value
        if rate is not None:
            out[i] = basal_delivered(rate, interval_minutes)
    return out
