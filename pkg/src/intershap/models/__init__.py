"""Predictors under explanation: the XOR oracle and the multimodal FCNN."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .fcnn import FcnnModel, FcnnSpec, fcnn_forward, gradient_check
from .oracle import UnsupportedSettingError, XorOracle, xor_oracle_predict
from .training import DEFAULT_SEEDS, TrainConfig, train_fcnn

__all__ = [
    "FcnnModel", "FcnnSpec", "TrainConfig", "UnsupportedSettingError", "XorOracle",
    "fcnn_forward", "gradient_check", "load_model", "predict_split", "save_model",
    "train_fcnn", "xor_oracle_predict", "DEFAULT_SEEDS",
]


def save_model(model: FcnnModel, out_dir: str | Path, extra: dict | None = None) -> Path:
    """Write ``model_manifest.json`` and ``weights.f32`` (little-endian, layer order)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = ["W0", "b0", "W1", "b1", "W2", "b2"]
    blob = b"".join(np.ascontiguousarray(p, dtype="<f4").tobytes() for p in model.params)
    (out / "weights.f32").write_bytes(blob)
    manifest = dict(model.manifest)
    manifest["spec"] = model.spec.to_dict()
    manifest["weights"] = [{"name": n, "shape": list(p.shape)} for n, p in zip(names, model.params)]
    manifest.update(extra or {})
    path = out / "model_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_model(path: str | Path) -> FcnnModel:
    """Load from a model directory or its ``model_manifest.json``."""
    path = Path(path)
    root = path if path.is_dir() else path.parent
    manifest = json.loads((root / "model_manifest.json").read_text())
    s = manifest["spec"]
    spec = FcnnSpec(s["fusion"], tuple(s["dims"]), s["class_count"], s.get("activation", "relu"))
    raw = np.frombuffer((root / "weights.f32").read_bytes(), dtype="<f4")
    params, offset = [], 0
    for entry in manifest["weights"]:
        size = int(np.prod(entry["shape"]))
        params.append(raw[offset:offset + size].reshape(entry["shape"]).astype(np.float64))
        offset += size
    if offset != raw.size:
        raise ValueError("weights.f32 size does not match the manifest shape table")
    return FcnnModel(spec, params, manifest)


def predict_split(model, dataset, split: str = "test", batch_size: int | None = None):
    """``(class indices, probabilities)`` for a split, in split order."""
    idx = dataset.indices(split)
    if batch_size is None:
        probs = model.predict_proba(dataset.batch(idx))
    else:
        parts = [model.predict_proba(dataset.batch(idx[i:i + batch_size])) for i in range(0, len(idx), batch_size)]
        probs = np.concatenate(parts) if parts else np.zeros((0, model.class_count))
    return probs.argmax(axis=1), probs
