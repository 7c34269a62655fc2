"""Clarke and Parkes (type 1) error-grid zone classification.

Both classifiers work on arrays of (reference, predicted) pairs in mg/dL
and return an array of zone letters.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from glucokit.metrics.scalar import PairedSeries

ZONES = ("A", "B", "C", "D", "E")


class GridKind(enum.Enum):
    CLARKE = "CLARKE"
    PARKES = "PARKES"


def clarke_zones(reference, predicted) -> np.ndarray:
    """Clarke zones; rules are checked in order A, E, C, D and the rest is B."""
    r = np.asarray(reference, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    zone_a = (np.abs(p - r) <= 0.2 * r) | ((r < 70) & (p < 70))
    zone_e = ((r >= 180) & (p <= 70)) | ((r <= 70) & (p >= 180))
    zone_c = (((r >= 70) & (r <= 290) & (p >= r + 110))
              | ((r >= 130) & (r <= 180) & (p <= 7.0 / 5.0 * r - 182)))
    zone_d = (((r >= 240) & (p >= 70) & (p <= 180))
              | ((r <= 70) & (p >= 70) & (p <= 180)))
    return np.select([zone_a, zone_e, zone_c, zone_d], ["A", "E", "C", "D"], default="B")


# Parkes type-1 boundary polylines as (reference, predicted) vertices in
# mg/dL. Upper lines bound a zone from above, lower lines from below. Lines
# are extended past their last vertex along the last segment so the grid
# covers references up to 600 mg/dL. A lower line imposes no bound left of
# its first vertex.
PARKES_TYPE1_UPPER = {
    "A": ((0, 50), (30, 50), (140, 170), (280, 380), (430, 550)),
    "B": ((0, 60), (30, 60), (50, 80), (70, 110), (260, 550)),
    "C": ((0, 100), (25, 100), (50, 125), (80, 215), (125, 550)),
    "D": ((0, 150), (35, 155), (50, 550)),
}
PARKES_TYPE1_LOWER = {
    "A": ((50, 30), (170, 145), (385, 300), (550, 450)),
    "B": ((120, 30), (260, 130), (550, 250)),
    "C": ((250, 40), (550, 150)),
}


def polyline_at(vertices, x, *, lower: bool) -> np.ndarray:
    """Evaluate a polyline y(x) with linear extrapolation past the last vertex."""
    x = np.asarray(x, dtype=np.float64)
    vx = np.array([v[0] for v in vertices], dtype=np.float64)
    vy = np.array([v[1] for v in vertices], dtype=np.float64)
    y = np.interp(x, vx, vy)
    slope = (vy[-1] - vy[-2]) / (vx[-1] - vx[-2])
    y = np.where(x > vx[-1], vy[-1] + slope * (x - vx[-1]), y)
    if lower:
        y = np.where(x < vx[0], -np.inf, y)
    return y


def parkes_zones(reference, predicted) -> np.ndarray:
    """Parkes type-1 zones; a point on a boundary belongs to the inner zone."""
    r = np.asarray(reference, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    up = {z: polyline_at(v, r, lower=False) for z, v in PARKES_TYPE1_UPPER.items()}
    lo = {z: polyline_at(v, r, lower=True) for z, v in PARKES_TYPE1_LOWER.items()}
    conditions = [p > up["D"], p > up["C"], p > up["B"], p > up["A"],
                  p < lo["C"], p < lo["B"], p < lo["A"]]
    return np.select(conditions, ["E", "D", "C", "B", "D", "C", "B"], default="A")


@dataclass(frozen=True)
class ErrorGridResult:
    grid_kind: GridKind
    zone_counts: dict
    zone_percentages: dict

    @property
    def total(self) -> int:
        return sum(self.zone_counts.values())


def error_grid(pairs: PairedSeries, kind: GridKind | str) -> ErrorGridResult:
    kind = GridKind(kind) if not isinstance(kind, GridKind) else kind
    classify = clarke_zones if kind is GridKind.CLARKE else parkes_zones
    zones = classify(pairs.reference, pairs.predicted)
    n = len(zones)
    counts = {z: int(np.count_nonzero(zones == z)) for z in ZONES}
    pct = {z: 100.0 * c / n for z, c in counts.items()}
    return ErrorGridResult(kind, counts, pct)
