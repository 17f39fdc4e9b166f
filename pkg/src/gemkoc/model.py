"""Stacked graph-embedded auto-encoders topped by a one-class regression head.

``fit`` trains ``depth - 1`` auto-encoder layers, each on the previous
layer's output, then the one-class head on the last representation, then a
threshold on the head's training outputs. ``depth == 1`` gives the
single-layer classifiers (KOC with the zero graph, LKOC/GKOC otherwise).
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data_io import MinMaxScaler
from .exceptions import DimensionError, IllConditionedSystemError
from .kernels import as_data_matrix
from .layers import LayerHyperparams, TrainedLayer, fit_autoencoder_layer, fit_oneclass_layer, transform


class ThresholdKind(str, enum.Enum):
    THETA1 = "THETA1"
    THETA2 = "THETA2"


class Label(str, enum.Enum):
    TARGET = "TARGET"
    OUTLIER = "OUTLIER"


@dataclass(frozen=True)
class Verdict:
    score: float
    label: Label


@dataclass(frozen=True)
class MkocConfig:
    """Architecture and training knobs.

    ``layers`` is either one :class:`LayerHyperparams` shared by every layer
    or a sequence of exactly ``depth`` of them (encoders first, head last).
    """

    depth: int = 1
    layers: LayerHyperparams | Sequence[LayerHyperparams] = dataclasses.field(default_factory=LayerHyperparams)
    threshold: ThresholdKind = ThresholdKind.THETA1
    eta: float = 0.05
    r: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError(f"depth must be at least 1, got {self.depth}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        object.__setattr__(self, "threshold", ThresholdKind(self.threshold))
        if not isinstance(self.layers, LayerHyperparams):
            layers = tuple(self.layers)
            if len(layers) != self.depth:
                raise ValueError(f"expected {self.depth} layer settings, got {len(layers)}")
            object.__setattr__(self, "layers", layers)

    def layer(self, h: int) -> LayerHyperparams:
        """Hyperparameters of layer ``h`` (1-based), with its graph seed derived from ``seed``."""
        hp = self.layers if isinstance(self.layers, LayerHyperparams) else self.layers[h - 1]
        graph = dataclasses.replace(hp.graph, seed=self.seed * 1000 + h)
        return dataclasses.replace(hp, graph=graph)


@dataclass(frozen=True)
class MkocModel:
    encoders: tuple[TrainedLayer, ...]
    head: TrainedLayer
    threshold_kind: ThresholdKind
    threshold: float
    train_output_mean: float
    r: float
    eta: float
    scaler: MinMaxScaler | None = None

    @property
    def depth(self) -> int:
        return len(self.encoders) + 1

    @property
    def n_features(self) -> int:
        layer0 = self.encoders[0] if self.encoders else self.head
        return layer0.n_features

    @property
    def layers(self) -> tuple[TrainedLayer, ...]:
        return self.encoders + (self.head,)


def fit_threshold_theta1(o_hat, r: float, eta: float) -> float:
    """Deviation from ``r`` at position ``floor(eta * N)`` (1-based, clamped to 1) of the descending sort."""
    o_hat = np.asarray(o_hat, dtype=float).ravel()
    if o_hat.size == 0:
        raise ValueError("cannot fit a threshold on an empty output vector")
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    dev = np.abs(o_hat - r)
    dec = -np.sort(-dev, kind="stable")
    idx = max(1, math.floor(eta * o_hat.size))
    return float(dec[idx - 1])


def fit_threshold_theta2(o_hat, eta: float) -> float:
    """``eta * |mean(O)|``."""
    o_hat = np.asarray(o_hat, dtype=float).ravel()
    if o_hat.size == 0:
        raise ValueError("cannot fit a threshold on an empty output vector")
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    return float(abs(eta * np.mean(o_hat)))


def _threshold(kind: ThresholdKind, o_hat: np.ndarray, r: float, eta: float) -> float:
    if kind is ThresholdKind.THETA1:
        return fit_threshold_theta1(o_hat, r, eta)
    return fit_threshold_theta2(o_hat, eta)


def fit_encoders(x, cfg: MkocConfig, n_encoders: int | None = None):
    """Fit the auto-encoder stack; returns the layers and the training representation."""
    n_encoders = cfg.depth - 1 if n_encoders is None else n_encoders
    rep = as_data_matrix(x)
    encoders = []
    for h in range(1, n_encoders + 1):
        layer = fit_autoencoder_layer(rep, cfg.layer(h), layer=h)
        rep = transform(layer, layer.train_inputs)
        encoders.append(layer)
    return encoders, rep


def fit_head(encoders, rep, cfg: MkocConfig, scaler: MinMaxScaler | None = None) -> MkocModel:
    """Fit the one-class head on ``rep`` (output of ``encoders``) and its threshold."""
    depth = len(encoders) + 1
    hp = cfg.layer(depth) if depth <= cfg.depth else cfg.layer(cfg.depth)
    head = fit_oneclass_layer(rep, cfg.r, hp, layer=depth)
    o_hat = transform(head, head.train_inputs).ravel()
    theta = _threshold(cfg.threshold, o_hat, cfg.r, cfg.eta)
    return MkocModel(
        encoders=tuple(encoders),
        head=head,
        threshold_kind=cfg.threshold,
        threshold=theta,
        train_output_mean=float(np.mean(o_hat)),
        r=float(cfg.r),
        eta=float(cfg.eta),
        scaler=scaler,
    )


def fit(x, cfg: MkocConfig, scaler: MinMaxScaler | None = None) -> MkocModel:
    """Train the full stack on target-class samples ``x``.

    ``x`` is used as given; ``scaler`` (if any) is only recorded so that
    :func:`predict` can apply the same preprocessing to raw inputs.
    """
    x = as_data_matrix(x)
    if x.shape[0] < 2:
        raise ValueError("need at least two training samples")
    try:
        encoders, rep = fit_encoders(x, cfg)
        return fit_head(encoders, rep, cfg, scaler)
    except IllConditionedSystemError as exc:
        raise IllConditionedSystemError(f"depth {cfg.depth} stack unstable: {exc}", exc.layer) from exc


def head_output(model: MkocModel, x_new) -> np.ndarray:
    """Head output for each row of ``x_new`` (raw features if the model carries a scaler)."""
    x = np.asarray(x_new, dtype=float)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.shape[1] != model.n_features:
        raise DimensionError(f"model expects {model.n_features} features, got {x.shape[1]}")
    if model.scaler is not None:
        x = model.scaler.transform(x)
    for layer in model.encoders:
        x = transform(layer, x)
    return transform(model.head, x).ravel()


def score_samples(model: MkocModel, x_new) -> np.ndarray:
    """Distance of each head output from ``r`` (theta1) or from the training mean (theta2)."""
    o = head_output(model, x_new)
    centre = model.r if model.threshold_kind is ThresholdKind.THETA1 else model.train_output_mean
    return np.abs(o - centre)


def is_target(model: MkocModel, x_new, threshold: float | None = None) -> np.ndarray:
    theta = model.threshold if threshold is None else threshold
    return score_samples(model, x_new) <= theta


def predict(model: MkocModel, x_new) -> list[Verdict]:
    scores = score_samples(model, x_new)
    return [Verdict(float(s), Label.TARGET if s <= model.threshold else Label.OUTLIER) for s in scores]


__all__ = [
    "Label",
    "MkocConfig",
    "MkocModel",
    "ThresholdKind",
    "Verdict",
    "fit",
    "fit_threshold_theta1",
    "fit_threshold_theta2",
    "head_output",
    "is_target",
    "predict",
    "score_samples",
]
