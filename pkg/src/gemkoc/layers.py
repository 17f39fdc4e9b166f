"""Closed-form graph-regularized kernel ridge regression layers.

Both the auto-encoder layers and the one-class output layer solve

    (K + (1/C) L K + (lambda/C) I) W = T

with ``T`` the layer input (auto-encoder) or a constant target column
(one-class head). Outputs are always ``K_new @ W``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .exceptions import DimensionError, IllConditionedSystemError, SolverResidualError
from .graphs import GraphSpec, LaplacianMatrix, build_laplacian
from .kernels import KernelMatrix, as_data_matrix, mean_distance_sigma, rbf_kernel

MAX_CONDITION = 1e12
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class LayerHyperparams:
    c: float = 1.0
    lam: float = 1.0
    graph: GraphSpec = field(default_factory=GraphSpec)

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"C must be positive, got {self.c}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")


@dataclass(frozen=True)
class TrainedLayer:
    train_inputs: np.ndarray
    sigma: float
    weights: np.ndarray
    hyperparams: LayerHyperparams
    residual: float = 0.0

    @property
    def n_features(self) -> int:
        return self.train_inputs.shape[1]

    def training_output(self) -> np.ndarray:
        return transform(self, self.train_inputs)


def system_matrix(k, lap, c: float, lam: float) -> np.ndarray:
    g = k.gram if isinstance(k, KernelMatrix) else np.asarray(k, dtype=float)
    lm = lap.matrix if isinstance(lap, LaplacianMatrix) else np.asarray(lap, dtype=float)
    if g.shape != lm.shape:
        raise DimensionError(f"kernel {g.shape} and Laplacian {lm.shape} disagree")
    a = g + (lm @ g) / c
    a[np.diag_indices_from(a)] += lam / c
    return a


def relative_residual(a: np.ndarray, w: np.ndarray, t: np.ndarray) -> float:
    return float(np.linalg.norm(a @ w - t) / max(1.0, np.linalg.norm(t)))


def solve_layer(k, lap, targets, hp: LayerHyperparams, layer: int | None = None) -> np.ndarray:
    """LU solve of the layer system; raises if it is too ill-conditioned.

    ``targets`` may be a vector or an ``N x m`` matrix; the result has the
    same shape.
    """
    return _solve(system_matrix(k, lap, hp.c, hp.lam), targets, hp, layer)[0]


def _solve(a: np.ndarray, targets, hp: LayerHyperparams, layer: int | None):
    t = np.asarray(targets, dtype=float)
    if t.shape[0] != a.shape[0]:
        raise DimensionError(f"targets have {t.shape[0]} rows, system has {a.shape[0]}")
    where = f"layer {layer}" if layer is not None else "layer"
    context = f"{where} (C={hp.c:g}, lambda={hp.lam:g}, graph={hp.graph.recipe.value})"
    if not np.all(np.isfinite(a)):
        raise IllConditionedSystemError(f"non-finite system matrix at {context}", layer)
    anorm = np.linalg.norm(a, 1)
    lu, piv, info = linalg.lapack.dgetrf(a)
    if info > 0:
        raise IllConditionedSystemError(f"singular system matrix at {context}", layer)
    rcond, _ = linalg.lapack.dgecon(lu, anorm, norm="1")
    if rcond * MAX_CONDITION < 1.0:
        raise IllConditionedSystemError(
            f"system matrix condition estimate {1.0 / max(rcond, 1e-300):.3g} exceeds "
            f"{MAX_CONDITION:.0e} at {context}",
            layer,
        )
    w = linalg.lu_solve((lu, piv), t)
    res = relative_residual(a, w, t)
    if res > RESIDUAL_TOL:
        # one step of iterative refinement
        w = w + linalg.lu_solve((lu, piv), t - a @ w)
        res = relative_residual(a, w, t)
    if res > RESIDUAL_TOL:
        raise SolverResidualError(f"relative residual {res:.3g} exceeds {RESIDUAL_TOL:g} at {context}")
    return w, res


def _fit(x_prev, targets, hp: LayerHyperparams, layer: int | None) -> TrainedLayer:
    x_prev = as_data_matrix(x_prev, "x_prev")
    sigma = mean_distance_sigma(x_prev)
    k = rbf_kernel(x_prev, sigma=sigma)
    lap = build_laplacian(k, hp.graph)
    w, res = _solve(system_matrix(k, lap, hp.c, hp.lam), targets, hp, layer)
    # C order, so a reloaded layer hits the same BLAS path and scores match bitwise
    return TrainedLayer(np.ascontiguousarray(x_prev), sigma, np.ascontiguousarray(w), hp, res)


def fit_autoencoder_layer(x_prev, hp: LayerHyperparams, layer: int | None = None) -> TrainedLayer:
    """Auto-encoder layer: regress the layer input onto itself."""
    x_prev = as_data_matrix(x_prev, "x_prev")
    return _fit(x_prev, x_prev, hp, layer)


def fit_oneclass_layer(x_prev, r: float, hp: LayerHyperparams, layer: int | None = None) -> TrainedLayer:
    """One-class head: regress every training sample onto the constant ``r``."""
    x_prev = as_data_matrix(x_prev, "x_prev")
    if not np.isfinite(r):
        raise ValueError("target value r must be finite")
    return _fit(x_prev, np.full((x_prev.shape[0], 1), float(r)), hp, layer)


def transform(layer: TrainedLayer, x_new) -> np.ndarray:
    """``K(x_new, train_inputs) @ W`` using the layer's own bandwidth."""
    x_new = np.asarray(x_new, dtype=float)
    if x_new.ndim == 1:
        x_new = x_new.reshape(1, -1)
    if x_new.shape[1] != layer.n_features:
        raise DimensionError(f"expected {layer.n_features} features, got {x_new.shape[1]}")
    if x_new.shape[0] == 0:
        return np.zeros((0, layer.weights.shape[1]))
    if x_new is layer.train_inputs or np.array_equal(x_new, layer.train_inputs):
        k = rbf_kernel(x_new, sigma=layer.sigma)
    else:
        k = rbf_kernel(x_new, layer.train_inputs, layer.sigma)
    return k.gram @ layer.weights
