"""Command-line workflow over a ``data/`` workspace.

    glucokit setup_directories
    glucokit parse --source synthetic --seed 7 --days 14 --output-name demo
    glucokit generate_config --data demo --models ridge,locf_baseline
    glucokit train_model --config demo
    glucokit calculate_metrics --config demo
    glucokit draw_plots --config demo --plot-type scatter
    glucokit set_unit --unit mmol/L

Diagnostics go to stderr; results are written only as files.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from glucokit.core import SIGNALS, GlucoseUnit, PipelineConfig, Scaling
from glucokit.errors import (
    ConfigError, EmptySetError, GlucokitError, InsufficientDataError, InvalidValueError, SchemaError,
    StaleModelError, WorkspaceError,
)
from glucokit.metrics import PairedSeries
from glucokit.models import ModelSpec, available_models, fit, learner_for, load_model, predict, save_model
from glucokit.parsers import SourceDescriptor, SourceKind, load_frame, merge_to_frame, parse_csv, write_raw_csv
from glucokit.parsers.csv_source import parse_timestamp
from glucokit.preprocess import PreparedData, prepare
from glucokit.report import (
    TableFormat, evaluate, metrics_table, render_scatter, render_single_prediction, render_trajectories,
)

log = logging.getLogger("glucokit")

SUBDIRS = ("raw", "configurations", "trained_models", "figures", "reports")
HIGHLIGHT_MINUTES = (30, 60, 120)


class Workspace:
    def __init__(self, root):
        self.root = Path(root)
        self.data = self.root / "data"

    def __getattr__(self, name):
        if name in SUBDIRS:
            return self.data / name
        raise AttributeError(name)

    @property
    def settings_path(self) -> Path:
        return self.data / "settings.json"

    def setup(self) -> "Workspace":
        for sub in SUBDIRS:
            path = self.data / sub
            try:
                path.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise WorkspaceError(f"cannot create {path}: {exc.strerror or exc}") from None
        return self

    def require(self) -> "Workspace":
        missing = [s for s in SUBDIRS if not (self.data / s).is_dir()]
        if missing:
            raise WorkspaceError(f"{self.root.resolve()} is not an initialized workspace "
                                 f"(missing data/{', data/'.join(missing)}); run setup_directories first")
        return self

    def unit(self, fallback: GlucoseUnit = GlucoseUnit.MGDL) -> GlucoseUnit:
        if not self.settings_path.exists():
            return fallback
        return GlucoseUnit.parse(json.loads(self.settings_path.read_text(encoding="utf-8"))["unit"])

    def raw_file(self, name: str) -> Path:
        path = self.raw / (name if name.endswith(".csv") else f"{name}.csv")
        if not path.is_file():
            raise WorkspaceError(f"raw dataset not found: {path}; run parse first")
        return path

    def config_file(self, name: str) -> Path:
        path = self.configurations / (name if name.endswith(".json") else f"{name}.json")
        if not path.is_file():
            raise WorkspaceError(f"configuration not found: {path}")
        return path

    def model_file(self, model: str, config: str) -> Path:
        return self.trained_models / f"{model.lower()}__{config}.json"


def _config_name(arg: str) -> str:
    return Path(arg).name.removesuffix(".json")


def _load_config(ws: Workspace, name: str) -> PipelineConfig:
    return PipelineConfig.from_json(ws.config_file(name).read_text(encoding="utf-8"))


def _load_raw_frame(ws: Workspace, config: PipelineConfig):
    return merge_to_frame(parse_csv(ws.raw_file(config.data_file)), config.interval_minutes)


def _prepare(ws: Workspace, config: PipelineConfig) -> PreparedData:
    frame = _load_raw_frame(ws, config)
    try:
        return prepare(frame, config)
    except EmptySetError as exc:
        need = config.num_lagged_samples + config.horizon_steps
        raise InsufficientDataError(
            f"insufficient data: the raw dataset has {len(frame)} bins of {config.interval_minutes} min; "
            f"at least {need} ({need * config.interval_minutes} min) are required, and more for a "
            f"train/test split ({exc})") from None


def _resolve_models(config: PipelineConfig, requested: Optional[str]) -> list[tuple[str, dict]]:
    specs = list(config.model_specs)
    if not requested:
        return specs
    wanted = [w.strip().upper() for w in requested.split(",") if w.strip()]
    by_name = {n.upper(): (n, h) for n, h in specs}
    unknown = [w for w in wanted if w not in by_name]
    if unknown:
        raise ConfigError(f"model(s) {', '.join(unknown)} not in configuration; "
                          f"available: {', '.join(sorted(by_name))}")
    return [by_name[w] for w in wanted]


def _model_spec(name: str, hyper: dict, config: PipelineConfig) -> ModelSpec:
    spec = ModelSpec(name, hyper)
    if "random_seed" in learner_for(spec.name).defaults and "random_seed" not in hyper:
        spec = ModelSpec(name, {**hyper, "random_seed": config.random_seed})
    return spec


# commands -----------------------------------------------------------------

def cmd_setup_directories(args, ws: Workspace) -> int:
    ws.setup()
    log.info("workspace ready at %s", ws.data.resolve())
    return 0


def cmd_parse(args, ws: Workspace) -> int:
    ws.require()
    kind = SourceKind(args.source)
    time_range = None
    if args.start or args.end:
        if not (args.start and args.end):
            raise ConfigError("--start and --end must be given together")
        time_range = (parse_timestamp(args.start), parse_timestamp(args.end))
    params = {}
    if kind is SourceKind.SYNTHETIC:
        params = {"seed": args.seed, "days": args.days}
        if args.noise_std is not None:
            params["noise_std"] = args.noise_std
        if args.no_meals:
            params["meals"] = ()
    desc = SourceDescriptor(kind, args.location, args.token, time_range, params)
    frame = load_frame(desc, args.interval)
    name = args.output_name or (Path(args.location).stem if args.location else f"{kind.value}_{args.seed}")
    path = write_raw_csv(frame, ws.raw / f"{name}.csv")
    for col, values in frame.columns.items():
        log.info("%-16s %d of %d bins present", col, int(np.count_nonzero(~np.isnan(values))), len(frame))
    log.info("wrote %s", path)
    return 0


def cmd_generate_config(args, ws: Workspace) -> int:
    ws.require()
    raw_path = ws.raw_file(args.data)
    frame = merge_to_frame(parse_csv(raw_path), args.interval)
    available = [c for c in frame.columns if np.any(~np.isnan(frame[c]))]
    features = [s.strip() for s in args.features.split(",") if s.strip()]
    what_if = [s.strip() for s in args.what_if.split(",") if s.strip()] if args.what_if else []
    absent = [s for s in features if s not in available]
    if absent:
        raise SchemaError(f"features {absent} not present in {raw_path.name}; available: {available}")
    hyper: dict[str, dict] = {}
    for item in args.hyper or []:
        try:
            target, value = item.split("=", 1)
            model, key = target.split(".", 1)
        except ValueError:
            raise ConfigError(f"--hyper expects MODEL.key=value, got {item!r}") from None
        hyper.setdefault(model.strip().upper(), {})[key.strip()] = json.loads(value)
    specs = []
    for name in [m.strip() for m in args.models.split(",") if m.strip()]:
        spec = ModelSpec(name, hyper.get(name.upper(), {}))
        specs.append((spec.name, hyper.get(spec.name, {})))
    config = PipelineConfig(
        data_file=raw_path.name, subject_id=args.subject_id, interval_minutes=args.interval,
        prediction_horizon_minutes=args.horizon, num_lagged_samples=args.lookback,
        feature_signals=tuple(features), what_if_signals=tuple(what_if), test_fraction=args.test_fraction,
        imputation_max_gap_minutes=args.max_gap, scaling=Scaling(args.scaling.upper()),
        model_specs=tuple(specs), unit=ws.unit(), random_seed=args.seed)
    name = args.output_name or raw_path.stem
    path = ws.configurations / f"{name}.json"
    path.write_text(config.to_json(), encoding="utf-8")
    log.info("wrote %s", path)
    return 0


def cmd_train_model(args, ws: Workspace) -> int:
    ws.require()
    cname = _config_name(args.config)
    config = _load_config(ws, cname)
    data = _prepare(ws, config)
    chash = config.content_hash()
    for name, hyper in _resolve_models(config, args.model):
        spec = _model_spec(name, hyper, config)
        model = fit(spec, data.train, data.scaler, chash)
        path = save_model(model, ws.model_file(spec.name, cname))
        summary = []
        for minutes in HIGHLIGHT_MINUTES:
            k = minutes // config.interval_minutes - 1
            if 0 <= k < model.horizon_steps and minutes % config.interval_minutes == 0:
                summary.append(f"{minutes} min RMSE {model.fit_report[k].train_rmse:.2f}")
        log.info("%s: converged=%s singular=%s; training %s -> %s", spec.name, model.converged,
                 any(r.singular for r in model.fit_report), ", ".join(summary), path)
    return 0


def _load_models(ws: Workspace, cname: str, config: PipelineConfig, requested: Optional[str]):
    models = []
    chash = config.content_hash()
    for name, _ in _resolve_models(config, requested):
        path = ws.model_file(name, cname)
        if not path.is_file():
            raise WorkspaceError(f"no trained artifact {path}; run train_model first")
        model = load_model(path)
        if model.config_hash != chash:
            raise StaleModelError(f"{path.name} was trained with a different configuration; retrain it")
        models.append(model)
    return models


def cmd_calculate_metrics(args, ws: Workspace) -> int:
    ws.require()
    cname = _config_name(args.config)
    config = _load_config(ws, cname)
    models = _load_models(ws, cname, config, args.models)
    data = _prepare(ws, config)
    unit = ws.unit(config.unit)
    reports = []
    for model in models:
        pred = predict(model, data.test.features)
        report = evaluate(model.spec.name, pred, data.test.targets, config.interval_minutes,
                          model.config_hash, unit)
        reports.append(report)
        stem = f"{model.spec.name.lower()}__{cname}__metrics"
        for fmt in TableFormat:
            (ws.reports / f"{stem}.{fmt.value}").write_text(metrics_table([report], fmt), encoding="utf-8")
    log.info("test-set metrics (%s):\n%s", unit.value,
             metrics_table(reports, TableFormat.MARKDOWN, horizons=HIGHLIGHT_MINUTES).rstrip())
    return 0


def cmd_draw_plots(args, ws: Workspace) -> int:
    ws.require()
    cname = _config_name(args.config)
    config = _load_config(ws, cname)
    models = _load_models(ws, cname, config, args.models)
    data = _prepare(ws, config)
    unit = ws.unit(config.unit)
    test = data.test
    for model in models:
        pred = predict(model, test.features)
        stem = f"{model.spec.name.lower()}__{cname}"
        if args.plot_type == "scatter":
            minutes = [int(m) for m in args.horizons.split(",")] if args.horizons else list(HIGHLIGHT_MINUTES)
            pairs = {m: PairedSeries(test.targets[:, m // config.interval_minutes - 1],
                                     pred[:, m // config.interval_minutes - 1])
                     for m in minutes
                     if m % config.interval_minutes == 0 and 1 <= m // config.interval_minutes <= pred.shape[1]}
            if not pairs:
                raise ConfigError(f"none of the horizons {minutes} exist for this configuration")
            path = render_scatter(pairs, ws.figures / f"{stem}__scatter.svg", unit=unit,
                                  title=f"{model.spec.name}: predicted vs measured")
        elif args.plot_type == "trajectories":
            lo = int(test.origins[0])
            window = int(args.window_hours * 60 // config.interval_minutes)
            segment = data.frame.slice(lo, min(len(data.frame), lo + window))
            keep = test.origins < lo + len(segment)
            path = render_trajectories(segment, [t for t, k in zip(test.sample_timestamps, keep) if k],
                                       pred[keep], ws.figures / f"{stem}__trajectories.svg", unit=unit,
                                       title=f"{model.spec.name}: predicted trajectories")
        else:
            i = args.origin if args.origin is not None else _default_origin(data)
            if not 0 <= i < len(test):
                raise ConfigError(f"--origin must lie in [0, {len(test) - 1}]")
            path = render_single_prediction(data.frame, int(test.origins[i]), pred[i],
                                            ws.figures / f"{stem}__single.svg", unit=unit)
        log.info("wrote %s", path)
    return 0


def _default_origin(data: PreparedData) -> int:
    """First test sample with a meal in the hour before it, else the first sample."""
    from glucokit.core import CARBS

    if CARBS in data.frame:
        carbs = data.frame[CARBS]
        step = data.frame.interval_minutes
        for i, o in enumerate(data.test.origins):
            window = carbs[max(0, o - 60 // step):o + 1]
            if np.any(window > 0):
                return i
    return 0


def cmd_set_unit(args, ws: Workspace) -> int:
    ws.require()
    unit = GlucoseUnit.parse(args.unit)
    ws.settings_path.write_text(json.dumps({"unit": unit.value}, indent=2) + "\n", encoding="utf-8")
    log.info("display unit set to %s", unit.value)
    return 0


def _unit_arg(text: str) -> str:
    try:
        return GlucoseUnit.parse(text).value
    except InvalidValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glucokit", description="Blood-glucose prediction workflow.")
    parser.add_argument("--workspace", default=".", help="workspace root (default: current directory)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("setup_directories", help="create the data/ folder layout")

    p = sub.add_parser("parse", help="fetch a data source into data/raw")
    p.add_argument("--source", required=True, choices=[k.value for k in SourceKind])
    p.add_argument("--location", help="file path or Nightscout base URL")
    p.add_argument("--token", help="Nightscout API secret or access token")
    p.add_argument("--start", help="range start (RFC 3339)")
    p.add_argument("--end", help="range end (RFC 3339)")
    p.add_argument("--output-name", help="raw dataset name (without .csv)")
    p.add_argument("--seed", type=int, default=0, help="synthetic source seed")
    p.add_argument("--days", type=int, default=14, help="synthetic source length in days")
    p.add_argument("--noise-std", type=float, help="synthetic noise standard deviation (mg/dL)")
    p.add_argument("--no-meals", action="store_true", help="synthetic source without the meal schedule")
    p.add_argument("--interval", type=int, default=5, help="grid interval in minutes")

    p = sub.add_parser("generate_config", help="write a pipeline configuration")
    p.add_argument("--data", required=True, help="raw dataset name in data/raw")
    p.add_argument("--output-name", help="configuration name (default: dataset name)")
    p.add_argument("--subject-id")
    p.add_argument("--interval", type=int, default=5)
    p.add_argument("--horizon", type=int, default=120, help="prediction horizon in minutes")
    p.add_argument("--lookback", type=int, default=12, help="number of lagged samples")
    p.add_argument("--features", default="CGM", help=f"comma-separated subset of {','.join(SIGNALS)}")
    p.add_argument("--what-if", default="", help="comma-separated future exogenous signals")
    p.add_argument("--test-fraction", type=float, default=0.25)
    p.add_argument("--max-gap", type=int, default=30, help="longest gap (minutes) to interpolate")
    p.add_argument("--scaling", default="standardize", choices=["standardize", "none"])
    p.add_argument("--models", default="ridge,locf_baseline",
                   help=f"comma-separated from {','.join(m.lower() for m in available_models())}")
    p.add_argument("--hyper", action="append", metavar="MODEL.key=value",
                   help="hyperparameter override (JSON value); repeatable")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train_model", help="train the configured models")
    p.add_argument("--config", required=True)
    p.add_argument("--model", help="train only this model (comma-separated allowed)")

    for cmd, text in (("calculate_metrics", "evaluate on the test split"), ("draw_plots", "render SVG plots")):
        p = sub.add_parser(cmd, help=text)
        p.add_argument("--config", required=True)
        p.add_argument("--models", help="comma-separated subset of the configured models")
        if cmd == "draw_plots":
            p.add_argument("--plot-type", required=True, choices=["scatter", "trajectories", "single"])
            p.add_argument("--horizons", help="scatter horizons in minutes (default 30,60,120)")
            p.add_argument("--window-hours", type=float, default=12.0,
                           help="length of the test segment shown in trajectory plots")
            p.add_argument("--origin", type=int, help="test-sample index for the single plot")

    p = sub.add_parser("set_unit", help="set the display unit")
    p.add_argument("--unit", required=True, type=_unit_arg, help="mg/dL or mmol/L")
    return parser


COMMANDS = {
    "setup_directories": cmd_setup_directories,
    "parse": cmd_parse,
    "generate_config": cmd_generate_config,
    "train_model": cmd_train_model,
    "calculate_metrics": cmd_calculate_metrics,
    "draw_plots": cmd_draw_plots,
    "set_unit": cmd_set_unit,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(logging.DEBUG if args.verbose else logging.INFO)
    log.propagate = False
    try:
        return COMMANDS[args.command](args, Workspace(args.workspace))
    except GlucokitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
