"""Where do forecast errors land on the Clarke and Parkes grids?

    python3 demos/error_grids.py

Classifies a few hand-picked (reference, prediction) pairs, then shows how the
zone shares of a noisy predictor shift as the noise grows, and how the
glucose-specific RMSE weighs the same errors differently from plain RMSE.
"""

import numpy as np

from glucokit.metrics import GridKind, PairedSeries, clarke_zones, error_grid, gs_rmse, parkes_zones, scalar_metrics

CASES = [
    (100, 100, "perfect"),
    (100, 125, "25 % high, harmless"),
    (60, 200, "hypo read as hyper"),
    (250, 80, "hyper read as normal"),
    (300, 60, "hyper read as hypo"),
    (50, 110, "missed hypo"),
]


def main():
    print(f"{'ref':>5} {'pred':>5}  Clarke Parkes")
    for r, p, note in CASES:
        print(f"{r:5d} {p:5d}    {clarke_zones([r], [p])[0]}      {parkes_zones([r], [p])[0]}    {note}")

    rng = np.random.default_rng(0)
    ref = rng.uniform(40, 400, 5000)
    print("\nrelative noise   Clarke A+B   Parkes A+B   RMSE    gsRMSE")
    for sd in (0.05, 0.1, 0.2, 0.4):
        pairs = PairedSeries(ref, np.clip(ref * (1 + rng.normal(0, sd, ref.size)), 1, None))
        c = error_grid(pairs, GridKind.CLARKE).zone_percentages
        k = error_grid(pairs, GridKind.PARKES).zone_percentages
        print(f"{sd:>13.0%}   {c['A'] + c['B']:9.1f} %  {k['A'] + k['B']:9.1f} %  "
              f"{scalar_metrics(pairs).rmse:6.1f}  {gs_rmse(pairs):7.1f}")


if __name__ == "__main__":
    main()
