"""Scatter, trajectory and single-prediction plots rendered to SVG."""

from __future__ import annotations

from datetime import datetime
from typing import Mapping, Optional, Sequence

import numpy as np

from glucokit.core import BOLUS, CARBS, CGM, DatasetFrame, GlucoseUnit, convert_glucose
from glucokit.errors import AlignmentError
from glucokit.metrics import PairedSeries
from glucokit.report.svg import PALETTE, Axes, Canvas, nice_ticks


def _to_unit(values, unit: GlucoseUnit) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return values if unit is GlucoseUnit.MGDL else values / convert_glucose(1.0, GlucoseUnit.MMOLL,
                                                                            GlucoseUnit.MGDL)


def _tick_labels(ticks):
    return [(t, f"{t:g}") for t in ticks]


def render_scatter(pairs_by_horizon: Mapping[int, PairedSeries], out_path, *,
                   unit: GlucoseUnit = GlucoseUnit.MGDL, title: str = "Predicted vs measured"):
    """Measured (x) against predicted (y), one colour per horizon, identity diagonal."""
    canvas = Canvas(title)
    horizons = sorted(pairs_by_horizon)
    series = [(h, _to_unit(pairs_by_horizon[h].reference, unit), _to_unit(pairs_by_horizon[h].predicted, unit))
              for h in horizons]
    allv = np.concatenate([np.concatenate([r, p]) for _, r, p in series]) if series else np.array([0.0, 1.0])
    lo = min(0.0, float(allv.min()))
    hi = float(allv.max()) * 1.05 if allv.max() > 0 else 1.0
    ax = Axes(canvas, 90, 50, 480, 480, (lo, hi), (lo, hi))
    ticks = _tick_labels(nice_ticks(lo, hi))
    ax.frame(f"Measured glucose [{unit.value}]", f"Predicted glucose [{unit.value}]", ticks, ticks)
    canvas.line(ax.x(lo), ax.y(lo), ax.x(hi), ax.y(hi), stroke="gray", stroke_dasharray="4 4",
                **{"class": "identity"})
    for i, (h, r, p) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        for rv, pv in zip(r, p):
            canvas.circle(ax.x(rv), ax.y(pv), 2.0, fill=color, fill_opacity="0.5", **{"class": "point"})
        ly = 70 + 22 * i
        canvas.rect(620, ly - 9, 12, 12, fill=color)
        canvas.text(640, ly + 1, f"{h} min (n={len(r)})")
    return canvas.save(out_path)


def _origin_indices(segment: DatasetFrame, origins: Sequence[datetime]) -> np.ndarray:
    step = segment.interval_minutes * 60
    idx = []
    for ts in origins:
        offset = (ts - segment.start).total_seconds()
        i = int(offset // step)
        if offset < 0 or offset % step or i >= len(segment):
            raise AlignmentError(f"prediction origin {ts.isoformat()} is not on the segment's time grid")
        idx.append(i)
    return np.array(idx, dtype=np.int64)


def trajectory_points(segment: DatasetFrame, origin: int, prediction) -> list[tuple[int, float]]:
    """(frame index, value) pairs of one dashed trajectory after truncation.

    Starts at the origin measurement and keeps only predicted steps that do
    not extend past the last CGM measurement of the segment. Returns an empty
    list when nothing survives the cut.
    """
    present = np.flatnonzero(~np.isnan(segment[CGM]))
    if not len(present):
        return []
    last = present[-1]
    steps = [(origin + k + 1, float(v)) for k, v in enumerate(prediction) if origin + k + 1 <= last]
    if not steps:
        return []
    start_value = segment[CGM][origin]
    head = [] if np.isnan(start_value) else [(origin, float(start_value))]
    return head + steps


def render_trajectories(segment: DatasetFrame, origins: Sequence[datetime], predictions, out_path, *,
                        unit: GlucoseUnit = GlucoseUnit.MGDL, title: str = "Predicted trajectories"):
    """CGM as dots, one dashed polyline per prediction origin, cut at the last measurement."""
    P = np.asarray(predictions, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != len(origins):
        raise AlignmentError(f"{len(origins)} origins but prediction matrix has shape {P.shape}")
    idx = _origin_indices(segment, origins)
    canvas = Canvas(title)
    cgm = segment[CGM]
    n = len(segment)
    trajectories = [trajectory_points(segment, int(i), P[row]) for row, i in enumerate(idx)]
    values = [v for v in cgm if not np.isnan(v)] + [v for t in trajectories for _, v in t]
    vals = _to_unit(values, unit) if values else np.array([0.0, 1.0])
    lo, hi = float(vals.min()), float(vals.max())
    pad = (hi - lo) * 0.05 or 1.0
    ax = Axes(canvas, 90, 50, 860, 470, (0, max(n - 1, 1)), (lo - pad, hi + pad))
    xt = [(float(i), segment.timestamp(int(i)).strftime("%H:%M"))
          for i in nice_ticks(0, max(n - 1, 1), 8)]
    ax.frame(f"Time (UTC, from {segment.start.strftime('%Y-%m-%d %H:%M')})",
             f"Glucose [{unit.value}]", xt, _tick_labels(nice_ticks(lo - pad, hi + pad)))
    for t in trajectories:
        if not t:
            continue
        ys = _to_unit([v for _, v in t], unit)
        canvas.polyline([(ax.x(i), ax.y(y)) for (i, _), y in zip(t, ys)], stroke=PALETTE[0],
                        stroke_width="1", stroke_dasharray="3 2", **{"class": "trajectory"})
    cg = _to_unit(cgm, unit)
    for i in range(n):
        if not np.isnan(cg[i]):
            canvas.circle(ax.x(i), ax.y(cg[i]), 2.0, fill="black", **{"class": "measurement"})
    canvas.circle(630, 30, 3, fill="black")
    canvas.text(640, 34, "CGM measurement")
    canvas.line(780, 30, 810, 30, stroke=PALETTE[0], stroke_dasharray="3 2")
    canvas.text(815, 34, "predicted trajectory")
    return canvas.save(out_path)


def render_single_prediction(frame: DatasetFrame, origin: int, prediction, out_path, *,
                             unit: GlucoseUnit = GlucoseUnit.MGDL, history_minutes: int = 180,
                             title: Optional[str] = None):
    """History, predicted trajectory, actual future (when available) and meal/bolus markers."""
    pred = np.asarray(prediction, dtype=np.float64).reshape(-1)
    H = len(pred)
    if not 0 <= origin < len(frame):
        raise AlignmentError(f"origin index {origin} outside frame of length {len(frame)}")
    step = frame.interval_minutes
    hist = history_minutes // step
    lo_i = max(0, origin - hist)
    hi_i = min(len(frame) - 1, origin + H)
    canvas = Canvas(title or f"Prediction from {frame.timestamp(origin).strftime('%Y-%m-%d %H:%M')} UTC")
    cgm = frame[CGM]

    history = [(i, cgm[i]) for i in range(lo_i, origin + 1) if not np.isnan(cgm[i])]
    future = [(i, cgm[i]) for i in range(origin + 1, hi_i + 1) if not np.isnan(cgm[i])]
    traj = [(origin + k + 1, v) for k, v in enumerate(pred)]
    if not np.isnan(cgm[origin]):
        traj = [(origin, cgm[origin])] + traj

    values = _to_unit([v for _, v in history + future + traj], unit)
    lo, hi = float(values.min()), float(values.max())
    pad = (hi - lo) * 0.1 or 1.0
    x_lo, x_hi = (lo_i - origin) * step, H * step
    ax = Axes(canvas, 90, 50, 860, 420, (x_lo, x_hi), (lo - pad, hi + pad))
    ax.frame("Minutes relative to prediction time", f"Glucose [{unit.value}]",
             [(t, f"{t:g}") for t in nice_ticks(x_lo, x_hi, 8)], _tick_labels(nice_ticks(lo - pad, hi + pad)))
    canvas.line(ax.x(0), ax.top, ax.x(0), ax.top + ax.height, stroke="gray", stroke_dasharray="2 3")

    def xm(i):
        return ax.x((i - origin) * step)

    for i, v in history:
        canvas.circle(xm(i), ax.y(_to_unit([v], unit)[0]), 2.5, fill="black", **{"class": "history"})
    if future:
        canvas.polyline([(xm(i), ax.y(_to_unit([v], unit)[0])) for i, v in future],
                        stroke="black", stroke_width="1.5", **{"class": "actual"})
    canvas.polyline([(xm(i), ax.y(_to_unit([v], unit)[0])) for i, v in traj],
                    stroke=PALETTE[1], stroke_width="2", stroke_dasharray="5 3", **{"class": "prediction"})

    base = ax.top + ax.height + 70
    for name, cls, color, label in ((CARBS, "carb-event", PALETTE[2], "g"), (BOLUS, "bolus-event", PALETTE[3], "U")):
        if name not in frame:
            continue
        col = frame[name]
        for i in range(lo_i, hi_i + 1):
            v = col[i]
            if np.isnan(v) or v <= 0:
                continue
            x = xm(i)
            y = base if name == CARBS else base + 20
            canvas.polygon([(x - 5, y), (x + 5, y), (x, y - 9)], fill=color, **{"class": cls})
            canvas.text(x + 7, y, f"{v:g} {label}", size=10)

    canvas.circle(630, 30, 3, fill="black")
    canvas.text(640, 34, "measured")
    canvas.line(720, 30, 750, 30, stroke=PALETTE[1], stroke_dasharray="5 3")
    canvas.text(755, 34, "predicted")
    return canvas.save(out_path)
