"""Forecast two weeks of simulated glucose with every learner and compare to LOCF.

    python3 demos/synthetic_benchmark.py [--days 14] [--seed 7] [--out demo_figures]

Prints a per-model RMSE table at 30/60/120 minutes and writes a scatter and a
trajectory plot for the best model at 60 minutes.
"""

import argparse
from pathlib import Path

import numpy as np

from glucokit import PipelineConfig
from glucokit.core import BOLUS, CARBS, CGM
from glucokit.metrics import PairedSeries
from glucokit.models import ModelSpec, fit, predict
from glucokit.parsers import synth_generate
from glucokit.preprocess import prepare
from glucokit.report import evaluate, metrics_table, render_scatter, render_trajectories

MODELS = ("LOCF_BASELINE", "OLS", "RIDGE", "LASSO", "ELASTIC_NET", "HUBER", "RANDOM_FOREST", "GBT")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--days", type=int, default=14)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", default="demo_figures")
    args = ap.parse_args()

    frame = synth_generate(args.seed, args.days, {"noise_std": 5.0})
    config = PipelineConfig(data_file="synthetic.csv", feature_signals=(CGM, BOLUS, CARBS),
                            what_if_signals=(BOLUS, CARBS))
    data = prepare(frame, config)
    print(f"{len(frame)} bins -> {len(data.train)} train / {len(data.test)} test samples, "
          f"{data.train.features.shape[1]} features\n")

    reports, preds = [], {}
    for name in MODELS:
        model = fit(ModelSpec(name), data.train, data.scaler)
        preds[name] = predict(model, data.test.features)
        reports.append(evaluate(name, preds[name], data.test.targets, config.interval_minutes))
    print(metrics_table(reports, "md", horizons=(30, 60, 120)))

    k60 = 60 // config.interval_minutes - 1
    best = min(reports, key=lambda r: r.scalar[60].rmse).model
    out = Path(args.out)
    out.mkdir(exist_ok=True)
    pairs = {60: PairedSeries(data.test.targets[:, k60], preds[best][:, k60])}
    render_scatter(pairs, out / f"{best.lower()}_scatter.svg", title=f"{best}: 60 min ahead")

    lo = int(data.test.origins[0])
    segment = data.frame.slice(lo, lo + 12 * 60 // config.interval_minutes)
    keep = data.test.origins < lo + len(segment)
    every_hour = keep & (np.arange(len(keep)) % 12 == 0)
    render_trajectories(segment, [t for t, k in zip(data.test.sample_timestamps, every_hour) if k],
                        preds[best][every_hour], out / f"{best.lower()}_trajectories.svg",
                        title=f"{best}: hourly forecasts")
    print(f"\nfigures for {best} written to {out}/")


if __name__ == "__main__":
    main()
