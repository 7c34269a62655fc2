"""Glucose-specific RMSE: squared errors weighted by a clinical penalty surface.

    pen(g, p) = 1 + alpha_low  * step(t_low - g, beta_low)  * step(p - g, gamma_low)
                  + alpha_high * step(g - t_high, beta_high) * step(g - p, gamma_high)

``g`` is the reference and ``p`` the prediction (mg/dL). The first term
punishes overestimating a low reference, the second underestimating a high
one. ``step(x, a)`` rises smoothly from 0 at ``x <= 0`` to 1 at ``x >= a``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from glucokit.metrics.scalar import PairedSeries


@dataclass(frozen=True)
class GlucosePenalty:
    alpha_low: float = 1.5
    alpha_high: float = 1.0
    beta_low: float = 30.0
    beta_high: float = 100.0
    gamma_low: float = 10.0
    gamma_high: float = 20.0
    t_low: float = 85.0
    t_high: float = 155.0

    def __post_init__(self):
        if self.alpha_low < 0 or self.alpha_high < 0:
            raise ValueError("penalty amplitudes must be non-negative")
        if min(self.beta_low, self.beta_high, self.gamma_low, self.gamma_high) <= 0:
            raise ValueError("penalty widths must be positive")

    def __call__(self, reference, predicted) -> np.ndarray:
        g = np.asarray(reference, dtype=np.float64)
        p = np.asarray(predicted, dtype=np.float64)
        low = smooth_step(self.t_low - g, self.beta_low) * smooth_step(p - g, self.gamma_low)
        high = smooth_step(g - self.t_high, self.beta_high) * smooth_step(g - p, self.gamma_high)
        return 1.0 + self.alpha_low * low + self.alpha_high * high


NO_PENALTY = GlucosePenalty(alpha_low=0.0, alpha_high=0.0)


def smooth_step(x, width) -> np.ndarray:
    """C1 quartic ramp: 0 for x <= 0, 1 for x >= width, 1/2 at width/2."""
    u = np.clip(np.asarray(x, dtype=np.float64) / width, 0.0, 1.0)
    return np.where(u <= 0.5, 8.0 * u ** 4, 1.0 - 8.0 * (1.0 - u) ** 4)


def gs_rmse(pairs: PairedSeries, penalty: GlucosePenalty = GlucosePenalty()) -> float:
    r, p = pairs.reference, pairs.predicted
    return float(np.sqrt(np.mean(penalty(r, p) * (p - r) ** 2)))
