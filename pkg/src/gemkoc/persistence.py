"""JSON model files.

Floats are written with Python's shortest round-trip repr, so
write -> read -> write reproduces the file byte for byte.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data_io import MinMaxScaler
from .exceptions import ModelFormatError
from .graphs import GraphSpec, Recipe
from .layers import LayerHyperparams, TrainedLayer
from .model import MkocModel, ThresholdKind

FORMAT = "gemkoc-model"
VERSION = 1


def _matrix(a: np.ndarray) -> list:
    return np.asarray(a, dtype=float).tolist()


def _layer_to_dict(layer: TrainedLayer, role: str) -> dict:
    hp, g = layer.hyperparams, layer.hyperparams.graph
    return {
        "role": role,
        "recipe": g.recipe.value,
        "neighbors": g.neighbors,
        "reg": g.reg,
        "clusters": g.clusters,
        "seed": g.seed,
        "c": hp.c,
        "lambda": hp.lam,
        "sigma": layer.sigma,
        "residual": layer.residual,
        "train_inputs": _matrix(layer.train_inputs),
        "weights": _matrix(layer.weights),
    }


def _layer_from_dict(d: dict) -> TrainedLayer:
    graph = GraphSpec(Recipe(d["recipe"]), d["neighbors"], d["reg"], d["clusters"], d["seed"])
    hp = LayerHyperparams(d["c"], d["lambda"], graph)
    x = np.array(d["train_inputs"], dtype=float).reshape(len(d["train_inputs"]), -1)
    w = np.array(d["weights"], dtype=float).reshape(x.shape[0], -1)
    return TrainedLayer(x, float(d["sigma"]), w, hp, float(d["residual"]))


def model_to_dict(model: MkocModel) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "threshold": {
            "kind": model.threshold_kind.value,
            "theta": model.threshold,
            "train_output_mean": model.train_output_mean,
            "r": model.r,
            "eta": model.eta,
        },
        "scaler": None if model.scaler is None else {
            "lo": _matrix(model.scaler.lo),
            "span": _matrix(model.scaler.span),
        },
        "layers": [_layer_to_dict(e, "encoder") for e in model.encoders] + [_layer_to_dict(model.head, "head")],
    }


def model_from_dict(d: dict) -> MkocModel:
    if d.get("format") != FORMAT:
        raise ModelFormatError("not a gemkoc model file")
    if d.get("version") != VERSION:
        raise ModelFormatError(f"unsupported model version {d.get('version')!r}")
    try:
        layers = d["layers"]
        if not layers or layers[-1]["role"] != "head":
            raise ModelFormatError("model file has no head layer")
        th = d["threshold"]
        sc = d["scaler"]
        return MkocModel(
            encoders=tuple(_layer_from_dict(x) for x in layers[:-1]),
            head=_layer_from_dict(layers[-1]),
            threshold_kind=ThresholdKind(th["kind"]),
            threshold=float(th["theta"]),
            train_output_mean=float(th["train_output_mean"]),
            r=float(th["r"]),
            eta=float(th["eta"]),
            scaler=None if sc is None else MinMaxScaler(np.array(sc["lo"], float), np.array(sc["span"], float)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"malformed model file: {exc}") from exc


def dumps(model: MkocModel) -> str:
    return json.dumps(model_to_dict(model), separators=(",", ":")) + "\n"


def loads(text: str) -> MkocModel:
    try:
        return model_from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc


def save_model(model: MkocModel, path) -> None:
    Path(path).write_text(dumps(model), encoding="utf-8")


def load_model(path) -> MkocModel:
    return loads(Path(path).read_text(encoding="utf-8"))
