"""Per-horizon evaluation reports and their CSV / JSON / Markdown tables."""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from glucokit.core import GlucoseUnit, convert_glucose
from glucokit.errors import ShapeError
from glucokit.metrics import (
    ZONES, GridKind, PairedSeries, ScalarMetrics, error_grid, gs_rmse, scalar_metrics,
)

GLUCOSE_COLUMNS = ("rmse", "mae", "me", "gs_rmse")
COLUMNS = (("model", "horizon_minutes", "rmse", "mae", "mard", "me", "mre", "gs_rmse")
           + tuple(f"clarke_{z}" for z in ZONES) + tuple(f"parkes_{z}" for z in ZONES))


class TableFormat(enum.Enum):
    CSV = "csv"
    JSON = "json"
    MARKDOWN = "md"


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    model: str
    config_hash: str
    horizons: tuple[int, ...]            # minutes
    scalar: dict                          # horizon -> ScalarMetrics (mg/dL)
    gs_rmse: dict                         # horizon -> float (mg/dL)
    clarke: dict                          # horizon -> ErrorGridResult
    parkes: dict                          # horizon -> ErrorGridResult
    unit: GlucoseUnit = GlucoseUnit.MGDL

    def __post_init__(self):
        for name in ("scalar", "gs_rmse", "clarke", "parkes"):
            if tuple(sorted(getattr(self, name))) != tuple(self.horizons):
                raise ShapeError(f"{name} horizon keys do not match {self.horizons}")

    def with_unit(self, unit: GlucoseUnit) -> "EvaluationReport":
        return EvaluationReport(self.model, self.config_hash, self.horizons, self.scalar, self.gs_rmse,
                                self.clarke, self.parkes, unit)

    def rows(self) -> list[dict]:
        """One row per horizon; glucose-valued cells in the display unit."""
        out = []
        for h in self.horizons:
            m: ScalarMetrics = self.scalar[h]
            row = {"model": self.model, "horizon_minutes": h,
                   "rmse": m.rmse, "mae": m.mae, "mard": m.mard, "me": m.me, "mre": m.mre,
                   "gs_rmse": self.gs_rmse[h]}
            for col in GLUCOSE_COLUMNS:
                row[col] = convert_glucose(row[col], GlucoseUnit.MGDL, self.unit)
            for z in ZONES:
                row[f"clarke_{z}"] = self.clarke[h].zone_percentages[z]
            for z in ZONES:
                row[f"parkes_{z}"] = self.parkes[h].zone_percentages[z]
            out.append(row)
        return out


def evaluate(model: str, predictions, targets, interval_minutes: int, config_hash: str = "",
             unit: GlucoseUnit = GlucoseUnit.MGDL) -> EvaluationReport:
    """Score an (n x H) trajectory matrix against the matching targets at every step."""
    P = np.asarray(predictions, dtype=np.float64)
    Y = np.asarray(targets, dtype=np.float64)
    if P.shape != Y.shape or P.ndim != 2:
        raise ShapeError(f"predictions {P.shape} and targets {Y.shape} must be equal 2-D shapes")
    horizons = tuple(interval_minutes * (k + 1) for k in range(P.shape[1]))
    scalar, gs, clarke, parkes = {}, {}, {}, {}
    for k, h in enumerate(horizons):
        pairs = PairedSeries(Y[:, k], P[:, k])
        scalar[h] = scalar_metrics(pairs)
        gs[h] = gs_rmse(pairs)
        clarke[h] = error_grid(pairs, GridKind.CLARKE)
        parkes[h] = error_grid(pairs, GridKind.PARKES)
    return EvaluationReport(model, config_hash, horizons, scalar, gs, clarke, parkes, unit)


def _fixed(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(value)
    s = f"{value:.4f}"
    return "0.0000" if s == "-0.0000" else s


def metrics_table(reports: Sequence[EvaluationReport], fmt: TableFormat | str = TableFormat.CSV,
                  horizons: Sequence[int] | None = None) -> str:
    """Render one row per (model, horizon).

    CSV and Markdown cells use 4-decimal fixed formatting; JSON keeps full
    float precision so values can be compared exactly across units.
    """
    fmt = TableFormat(fmt) if not isinstance(fmt, TableFormat) else fmt
    rows = [row for rep in reports for row in rep.rows()
            if horizons is None or row["horizon_minutes"] in horizons]
    if fmt is TableFormat.JSON:
        units = sorted({rep.unit.value for rep in reports})
        doc = {"unit": units[0] if len(units) == 1 else units, "columns": list(COLUMNS), "rows": rows}
        return json.dumps(doc, indent=2) + "\n"
    if fmt is TableFormat.CSV:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(COLUMNS)
        for row in rows:
            writer.writerow([_fixed(row[c]) for c in COLUMNS])
        return buf.getvalue()
    lines = ["| " + " | ".join(COLUMNS) + " |", "|" + "|".join("---" for _ in COLUMNS) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(_fixed(row[c]) for c in COLUMNS) + " |")
    return "\n".join(lines) + "\n"
