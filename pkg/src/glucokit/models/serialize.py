"""JSON model artifacts with base64 little-endian float64 payloads.

Layout::

    {"format_version": 1, "spec": {...}, "feature_names": [...],
     "scaler": {"mean": b64, "scale": b64}, "horizons": [1, ..., H],
     "payload": [{array name: b64, ...} per horizon],
     "config_hash": "...", "fit_report": [...], "checksum": sha256}

The checksum covers the canonical JSON of every other field.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from glucokit.errors import IntegrityError, UnsupportedFormatError
from glucokit.preprocess import ScalerParams


def encode_array(arr) -> str:
    return base64.b64encode(np.asarray(arr, dtype="<f8").tobytes()).decode("ascii")


def decode_array(text: str) -> np.ndarray:
    raw = base64.b64decode(text.encode("ascii"), validate=True)
    if len(raw) % 8:
        raise IntegrityError("payload length is not a multiple of 8 bytes")
    return np.frombuffer(raw, dtype="<f8").astype(np.float64)


def _canonical(doc: dict) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=True).encode("utf-8")


def model_to_document(model) -> dict:
    doc = {
        "format_version": model.format_version,
        "spec": model.spec.to_dict(),
        "feature_names": list(model.feature_names),
        "scaler": {"mean": encode_array(model.scaler.mean), "scale": encode_array(model.scaler.scale)},
        "horizons": list(range(1, model.horizon_steps + 1)),
        "payload": [{k: encode_array(v) for k, v in sorted(p.to_arrays().items())} for p in model.predictors],
        "config_hash": model.config_hash,
        "fit_report": [asdict(r) for r in model.fit_report],
    }
    doc["checksum"] = hashlib.sha256(_canonical(doc)).hexdigest()
    return doc


def save_model(model, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(model_to_document(model), sort_keys=True, indent=1) + "\n"
    path.write_text(text, encoding="utf-8")
    return path


def load_model(path):
    from glucokit.models import FORMAT_VERSION, HorizonFit, ModelSpec, TrainedModel, learner_for

    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise IntegrityError(f"{path}: model file is corrupted or truncated ({exc})") from None
    if not isinstance(doc, dict):
        raise IntegrityError(f"{path}: model file is not a JSON object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise UnsupportedFormatError(
            f"{path}: unsupported model format_version {doc.get('format_version')!r} (expected {FORMAT_VERSION})")
    checksum = doc.pop("checksum", None)
    if checksum != hashlib.sha256(_canonical(doc)).hexdigest():
        raise IntegrityError(f"{path}: checksum mismatch, payload corrupted")
    try:
        spec = ModelSpec(doc["spec"]["name"], doc["spec"]["hyperparameters"])
        learner = learner_for(spec.name)
        scaler = ScalerParams(decode_array(doc["scaler"]["mean"]), decode_array(doc["scaler"]["scale"]))
        predictors = [learner.predictor.from_arrays({k: decode_array(v) for k, v in p.items()})
                      for p in doc["payload"]]
        report = [HorizonFit(**r) for r in doc["fit_report"]]
        if len(predictors) != len(doc["horizons"]):
            raise IntegrityError(f"{path}: payload has {len(predictors)} predictors for "
                                 f"{len(doc['horizons'])} horizons")
        return TrainedModel(spec, predictors, scaler, tuple(doc["feature_names"]), doc["config_hash"],
                            doc["format_version"], report)
    except (KeyError, TypeError, ValueError) as exc:
        raise IntegrityError(f"{path}: malformed model document ({exc})") from None
