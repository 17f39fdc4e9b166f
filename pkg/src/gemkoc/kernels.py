"""Pairwise distances, the RBF kernel and the mean-distance bandwidth heuristic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .exceptions import DegenerateDataError, DimensionError


@dataclass(frozen=True)
class KernelMatrix:
    """Gram matrix together with the bandwidth used to build it."""

    gram: np.ndarray
    sigma: float

    @property
    def n(self) -> int:
        return self.gram.shape[0]


def as_data_matrix(x, name: str = "x") -> np.ndarray:
    """Coerce ``x`` to a finite 2-D float array (rows are samples)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must have at least one row and one column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def pairwise_sq_dist(a, b=None) -> np.ndarray:
    """Squared Euclidean distances between the rows of ``a`` and ``b``.

    Uses the expansion ``|a|^2 + |b|^2 - 2 a.b``; round-off negatives are
    clamped to zero. When ``b`` is omitted the diagonal is exactly zero.
    """
    a = as_data_matrix(a, "a")
    same = b is None
    b = a if same else as_data_matrix(b, "b")
    if a.shape[1] != b.shape[1]:
        raise DimensionError(f"column mismatch: {a.shape[1]} vs {b.shape[1]}")
    aa = np.einsum("ij,ij->i", a, a)
    bb = aa if same else np.einsum("ij,ij->i", b, b)
    d2 = aa[:, None] + bb[None, :] - 2.0 * (a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    if same:
        d2 = 0.5 * (d2 + d2.T)
        np.fill_diagonal(d2, 0.0)
    return d2


def mean_distance_sigma(x) -> float:
    """Mean (unsquared) Euclidean distance over all unordered pairs of rows."""
    x = as_data_matrix(x)
    if x.shape[0] < 2:
        raise DegenerateDataError("bandwidth heuristic needs at least two samples")
    sigma = float(np.mean(pdist(x, "euclidean")))
    if not sigma > 0.0:
        raise DegenerateDataError("all training rows are identical; kernel bandwidth would be 0")
    return sigma


def rbf_kernel(a, b=None, sigma: float = 1.0) -> KernelMatrix:
    """``exp(-|a_i - b_j|^2 / (2 sigma^2))``; symmetric with unit diagonal when ``b`` is omitted."""
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    d2 = pairwise_sq_dist(a, b)
    return KernelMatrix(np.exp(-d2 / (2.0 * sigma * sigma)), float(sigma))
