"""Plug-and-play model zoo: one regressor per horizon step behind a uniform interface.

New learners (e.g. recurrent or convolutional networks living in another
package) join the zoo with :func:`register_model`; they only need a fit
function and a predictor class with ``predict``, ``to_arrays`` and
``from_arrays``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional

import numpy as np

from glucokit.errors import InvalidParameterError, ShapeError
from glucokit.models.linear import (
    LinearPredictor, SolveInfo, elastic_net_solve, huber_solve, ridge_solve,
)
from glucokit.models.trees import TreeEnsemble, fit_gradient_boosting, fit_random_forest
from glucokit.preprocess import ScalerParams, SupervisedSet

FORMAT_VERSION = 1
LOCF_FEATURE = "CGM[t-0]"


class LocfPredictor:
    """Carries the current CGM value forward; reads the unscaled feature row."""

    kind = "locf"
    raw_features = True

    def __init__(self, column: int = -1):
        self.column = column

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64)[:, self.column].copy()

    def to_arrays(self) -> dict:
        return {}

    @classmethod
    def from_arrays(cls, arrays: dict) -> "LocfPredictor":
        return cls()


@dataclass(frozen=True)
class Learner:
    name: str
    defaults: Mapping[str, Any]
    fit: Callable  # (X, y, hyperparameters, seed, feature_names) -> (predictor, SolveInfo, extra)
    predictor: type


_REGISTRY: dict[str, Learner] = {}


def register_model(name: str, defaults: Mapping[str, Any], fit: Callable, predictor: type) -> None:
    _REGISTRY[name.upper()] = Learner(name.upper(), dict(defaults), fit, predictor)


def available_models() -> list[str]:
    return sorted(_REGISTRY)


_RANGES = {
    "alpha": lambda v: v >= 0,
    "l1_ratio": lambda v: 0 <= v <= 1,
    "huber_delta": lambda v: v > 0,
    "n_trees": lambda v: isinstance(v, int) and v >= 1,
    "max_depth": lambda v: v is None or (isinstance(v, int) and v >= 1),
    "learning_rate": lambda v: 0 < v <= 1,
    "min_samples_leaf": lambda v: isinstance(v, int) and v >= 1,
    "subsample": lambda v: 0 < v <= 1,
    "random_seed": lambda v: isinstance(v, int) and not isinstance(v, bool),
}


@dataclass(frozen=True)
class ModelSpec:
    name: str
    hyperparameters: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        name = str(self.name).upper()
        if name not in _REGISTRY:
            raise InvalidParameterError(f"unknown model {self.name!r}; available: {', '.join(available_models())}")
        learner = _REGISTRY[name]
        unknown = set(self.hyperparameters) - set(learner.defaults)
        if unknown:
            raise InvalidParameterError(f"{name}: unknown hyperparameters {sorted(unknown)}; "
                                        f"accepted: {sorted(learner.defaults)}")
        merged = {**learner.defaults, **self.hyperparameters}
        for key, value in merged.items():
            check = _RANGES.get(key)
            if check is not None and not check(value):
                raise InvalidParameterError(f"{name}: hyperparameter {key}={value!r} out of range")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "hyperparameters", dict(sorted(merged.items())))

    def to_dict(self) -> dict:
        return {"name": self.name, "hyperparameters": dict(self.hyperparameters)}


@dataclass
class HorizonFit:
    converged: bool = True
    singular: bool = False
    iterations: int = 0
    train_rmse: float = float("nan")
    training_loss: Optional[list] = None


@dataclass(eq=False)
class TrainedModel:
    spec: ModelSpec
    predictors: list
    scaler: ScalerParams
    feature_names: tuple
    config_hash: str = ""
    format_version: int = FORMAT_VERSION
    fit_report: list = field(default_factory=list)

    def __post_init__(self):
        self.feature_names = tuple(self.feature_names)
        if len(self.scaler.mean) != len(self.feature_names):
            raise ShapeError("scaler width does not match feature_names")

    @property
    def horizon_steps(self) -> int:
        return len(self.predictors)

    @property
    def converged(self) -> bool:
        return all(h.converged for h in self.fit_report)

    def predict(self, features) -> np.ndarray:
        return predict(self, features)


def _horizon_seed(seed: int, h: int) -> int:
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, h]).generate_state(1)[0])


def fit(spec: ModelSpec, train: SupervisedSet, scaler: ScalerParams, config_hash: str = "") -> TrainedModel:
    """Fit one independent regressor per horizon step on scaled features."""
    if len(train) == 0:
        raise InvalidParameterError("cannot fit on an empty training set")
    learner = _REGISTRY[spec.name]
    raw = np.asarray(train.features, dtype=np.float64)
    scaled = (raw - scaler.mean) / scaler.scale
    hyper = dict(spec.hyperparameters)
    predictors, report = [], []
    for h in range(train.horizon_steps):
        y = train.targets[:, h]
        X = raw if getattr(learner.predictor, "raw_features", False) else scaled
        predictor, info, extra = learner.fit(X, y, hyper, _horizon_seed(hyper.get("random_seed", 0), h),
                                             train.feature_names)
        resid = predictor.predict(X) - y
        report.append(HorizonFit(converged=info.converged, singular=info.singular,
                                 iterations=info.iterations,
                                 train_rmse=float(np.sqrt(np.mean(resid ** 2))),
                                 training_loss=extra))
        predictors.append(predictor)
    return TrainedModel(spec, predictors, scaler, train.feature_names, config_hash, FORMAT_VERSION, report)


def predict(model: TrainedModel, features) -> np.ndarray:
    """Trajectory matrix (rows x H) in mg/dL."""
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1 and X.size == 0:
        X = X.reshape(0, len(model.feature_names))
    if X.ndim != 2 or X.shape[1] != len(model.feature_names):
        raise ShapeError(f"expected rows of width {len(model.feature_names)}, got shape {X.shape}")
    out = np.empty((X.shape[0], model.horizon_steps))
    if X.shape[0] == 0:
        return out
    scaled = (X - model.scaler.mean) / model.scaler.scale
    for h, predictor in enumerate(model.predictors):
        if isinstance(predictor, LocfPredictor):
            predictor = LocfPredictor(model.feature_names.index(LOCF_FEATURE))
        out[:, h] = predictor.predict(X if getattr(predictor, "raw_features", False) else scaled)
    return out


# built-in learners ---------------------------------------------------------

def _fit_ols(X, y, hp, seed, names):
    w, b, info = ridge_solve(X, y, 0.0)
    return LinearPredictor(w, b), info, None


def _fit_ridge(X, y, hp, seed, names):
    w, b, info = ridge_solve(X, y, hp["alpha"])
    return LinearPredictor(w, b), info, None


def _fit_lasso(X, y, hp, seed, names):
    w, b, info = elastic_net_solve(X, y, hp["alpha"], 1.0)
    return LinearPredictor(w, b), info, None


def _fit_enet(X, y, hp, seed, names):
    w, b, info = elastic_net_solve(X, y, hp["alpha"], hp["l1_ratio"])
    return LinearPredictor(w, b), info, None


def _fit_huber(X, y, hp, seed, names):
    w, b, info = huber_solve(X, y, hp["huber_delta"], hp["alpha"])
    return LinearPredictor(w, b), info, None


def _fit_rf(X, y, hp, seed, names):
    model = fit_random_forest(X, y, n_trees=hp["n_trees"], max_depth=hp["max_depth"],
                              min_samples_leaf=hp["min_samples_leaf"], subsample=hp["subsample"], seed=seed)
    return model, SolveInfo(), None


def _fit_gbt(X, y, hp, seed, names):
    model, losses = fit_gradient_boosting(
        X, y, n_trees=hp["n_trees"], max_depth=hp["max_depth"], min_samples_leaf=hp["min_samples_leaf"],
        learning_rate=hp["learning_rate"], subsample=hp["subsample"], seed=seed)
    return model, SolveInfo(iterations=hp["n_trees"]), losses


def _fit_locf(X, y, hp, seed, names):
    if LOCF_FEATURE not in names:
        raise InvalidParameterError(f"LOCF baseline needs the {LOCF_FEATURE} feature")
    return LocfPredictor(list(names).index(LOCF_FEATURE)), SolveInfo(), None


register_model("OLS", {}, _fit_ols, LinearPredictor)
register_model("RIDGE", {"alpha": 1.0}, _fit_ridge, LinearPredictor)
register_model("LASSO", {"alpha": 0.1}, _fit_lasso, LinearPredictor)
register_model("ELASTIC_NET", {"alpha": 0.1, "l1_ratio": 0.5}, _fit_enet, LinearPredictor)
register_model("HUBER", {"huber_delta": 10.0, "alpha": 0.0}, _fit_huber, LinearPredictor)
register_model("RANDOM_FOREST", {"n_trees": 50, "max_depth": 10, "min_samples_leaf": 5,
                                 "subsample": 1.0, "random_seed": 0}, _fit_rf, TreeEnsemble)
register_model("GBT", {"n_trees": 100, "max_depth": 3, "learning_rate": 0.1, "min_samples_leaf": 5,
                       "subsample": 1.0, "random_seed": 0}, _fit_gbt, TreeEnsemble)
register_model("LOCF_BASELINE", {}, _fit_locf, LocfPredictor)


def learner_for(name: str) -> Learner:
    return _REGISTRY[name.upper()]


from glucokit.models.serialize import load_model, save_model  # noqa: E402

__all__ = [
    "ModelSpec", "TrainedModel", "HorizonFit", "fit", "predict", "save_model", "load_model",
    "register_model", "available_models", "FORMAT_VERSION",
]
