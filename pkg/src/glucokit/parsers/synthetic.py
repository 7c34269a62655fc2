"""Seeded discrete-time glucose simulator used in place of restricted datasets.

Per 5-minute step::

    g[t+1] = g[t] + carb_effect[t] - insulin_effect[t] + drift[t]
             - reversion * (g[t] - baseline) + noise[t]

clamped to [40, 400] mg/dL. A meal of ``c`` grams raises glucose by
``c * insulin_sensitivity / carb_ratio`` in total, spread over a triangular
60-minute absorption kernel; a bolus of ``u`` units lowers it by
``u * insulin_sensitivity`` over a triangular 180-minute action kernel that
peaks at 75 minutes. Basal insulin is assumed to balance endogenous
production and is recorded but has no net effect.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from datetime import datetime, timezone
from typing import Any, Mapping

import numpy as np

from glucokit.core import BASAL, BOLUS, CARBS, CGM, DatasetFrame
from glucokit.errors import InvalidParameterError
from glucokit.parsers.merge import basal_delivered

INTERVAL_MINUTES = 5
GLUCOSE_FLOOR = 40.0
GLUCOSE_CEILING = 400.0

CARB_KERNEL_MINUTES = 60
INSULIN_KERNEL_MINUTES = 180
INSULIN_PEAK_MINUTES = 75

DEFAULT_MEALS = ((7 * 60, 45.0), (12 * 60 + 30, 60.0), (19 * 60, 70.0))


@dataclass(frozen=True)
class SynthParams:
    baseline: float = 120.0
    insulin_sensitivity: float = 40.0   # mg/dL per U
    carb_ratio: float = 10.0            # g per U
    noise_std: float = 0.0              # mg/dL per step
    meals: tuple = DEFAULT_MEALS        # (minute of day, grams)
    meal_time_jitter: float = 30.0      # minutes, uniform +-
    meal_size_jitter: float = 0.2       # relative, uniform +-
    bolus_fraction: float = 1.0         # share of meal carbs covered by bolus
    basal_rate: float = 0.8             # U/hr
    circadian_amplitude: float = 0.0    # mg/dL per step
    reversion: float = 0.01             # per step
    start: datetime = datetime(2024, 1, 1, tzinfo=timezone.utc)

    @classmethod
    def from_map(cls, params: Mapping[str, Any]) -> "SynthParams":
        known = {f.name for f in fields(cls)}
        unknown = set(params) - known
        if unknown:
            raise InvalidParameterError(f"unknown synthetic parameters: {sorted(unknown)}")
        kw = dict(params)
        if "meals" in kw:
            kw["meals"] = tuple((float(m), float(g)) for m, g in kw["meals"])
        return cls(**kw)

    def check(self):
        if self.insulin_sensitivity < 0:
            raise InvalidParameterError("insulin_sensitivity must be non-negative")
        if self.carb_ratio <= 0:
            raise InvalidParameterError("carb_ratio must be positive")
        if self.noise_std < 0:
            raise InvalidParameterError("noise_std must be non-negative")
        if not GLUCOSE_FLOOR <= self.baseline <= GLUCOSE_CEILING:
            raise InvalidParameterError(f"baseline must lie in [{GLUCOSE_FLOOR}, {GLUCOSE_CEILING}]")
        if self.basal_rate < 0 or self.bolus_fraction < 0:
            raise InvalidParameterError("basal_rate and bolus_fraction must be non-negative")
        if not 0 <= self.reversion < 1:
            raise InvalidParameterError("reversion must lie in [0, 1)")
        if self.meal_time_jitter < 0 or not 0 <= self.meal_size_jitter < 1:
            raise InvalidParameterError("meal jitters must be non-negative (size jitter < 1)")
        for minute, grams in self.meals:
            if grams < 0 or not 0 <= minute < 24 * 60:
                raise InvalidParameterError(f"invalid meal ({minute}, {grams})")


def triangular_kernel(support_minutes: int, peak_minutes: float,
                      interval: int = INTERVAL_MINUTES) -> np.ndarray:
    """Per-step weights of a triangle on [0, support] peaking at ``peak``; sums to 1."""
    mid = (np.arange(support_minutes // interval) + 0.5) * interval
    rise = mid / peak_minutes
    fall = (support_minutes - mid) / (support_minutes - peak_minutes)
    w = np.where(mid <= peak_minutes, rise, fall)
    return w / w.sum()


CARB_KERNEL = triangular_kernel(CARB_KERNEL_MINUTES, CARB_KERNEL_MINUTES / 2)
INSULIN_KERNEL = triangular_kernel(INSULIN_KERNEL_MINUTES, INSULIN_PEAK_MINUTES)


def synth_generate(seed: int, days: int, params: Mapping[str, Any] | SynthParams | None = None) -> DatasetFrame:
    """Simulate ``days`` of 5-minute CGM, bolus, basal and carb data.

    The output is a pure function of ``(seed, days, params)``.
    """
    if isinstance(days, bool) or not isinstance(days, (int, np.integer)) or days < 1:
        raise InvalidParameterError(f"days must be a positive integer, got {days!r}")
    p = params if isinstance(params, SynthParams) else SynthParams.from_map(params or {})
    p.check()
    rng = np.random.default_rng(seed)
    steps_per_day = 24 * 60 // INTERVAL_MINUTES
    n = int(days) * steps_per_day

    carbs = np.zeros(n)
    bolus = np.zeros(n)
    for day in range(int(days)):
        for minute, grams in p.meals:
            shift = rng.uniform(-p.meal_time_jitter, p.meal_time_jitter)
            scale = 1.0 + rng.uniform(-p.meal_size_jitter, p.meal_size_jitter)
            t = day * steps_per_day + int(round((minute + shift) / INTERVAL_MINUTES))
            if 0 <= t < n and grams > 0:
                g = round(grams * scale)
                carbs[t] += g
                bolus[t] += round(g * p.bolus_fraction / p.carb_ratio * 20) / 20

    noise = rng.normal(0.0, p.noise_std, n) if p.noise_std > 0 else np.zeros(n)
    carb_effect = np.convolve(carbs, CARB_KERNEL)[:n] * (p.insulin_sensitivity / p.carb_ratio)
    insulin_effect = np.convolve(bolus, INSULIN_KERNEL)[:n] * p.insulin_sensitivity
    minutes = np.arange(n) * INTERVAL_MINUTES
    # peaks in the early morning (dawn phenomenon)
    drift = p.circadian_amplitude * np.sin(2 * np.pi * (minutes - 4 * 60) / (24 * 60))

    glucose = np.empty(n)
    g = p.baseline
    for t in range(n):
        glucose[t] = g
        g = g + carb_effect[t] - insulin_effect[t] + drift[t] - p.reversion * (g - p.baseline) + noise[t]
        g = min(max(g, GLUCOSE_FLOOR), GLUCOSE_CEILING)

    basal = np.full(n, basal_delivered(p.basal_rate, INTERVAL_MINUTES))
    return DatasetFrame(p.start, INTERVAL_MINUTES, {
        CGM: glucose,
        BOLUS: np.where(bolus > 0, bolus, np.nan),
        BASAL: basal,
        CARBS: np.where(carbs > 0, carbs, np.nan),
    })
