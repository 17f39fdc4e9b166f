"""Graph Laplacians built in the kernel-induced feature space.

Local recipes (heat-kernel k-NN, LLE) encode neighbourhood structure; global
recipes (centering, clustering-based centering) encode the variance of the
whole sample or of its clusters. All constructions only touch Gram entries,
so the feature map stays implicit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import GraphConstructionError
from .kernels import KernelMatrix


class Recipe(str, enum.Enum):
    LE_KNN = "LE_KNN"
    LLE = "LLE"
    LDA_CENTERING = "LDA_CENTERING"
    CDA = "CDA"
    ZERO = "ZERO"


@dataclass(frozen=True)
class LaplacianMatrix:
    matrix: np.ndarray
    recipe: Recipe
    clusters: int | None = None


@dataclass(frozen=True)
class NeighborGraph:
    weights: np.ndarray
    k: int


@dataclass(frozen=True)
class GraphSpec:
    """Which Laplacian to build for a layer and with which knobs.

    ``neighbors=None`` means ``min(10, N - 1)``; ``sigma=None`` for the heat
    kernel means "reuse the layer's RBF bandwidth".
    """

    recipe: Recipe = Recipe.ZERO
    neighbors: int | None = None
    reg: float = 1e-3
    clusters: int | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "recipe", Recipe(self.recipe))
        if self.recipe is Recipe.CDA and self.clusters is None:
            raise ValueError("CDA graph needs a cluster count")


def _gram(k) -> np.ndarray:
    g = k.gram if isinstance(k, KernelMatrix) else np.asarray(k, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"Gram matrix must be square, got shape {g.shape}")
    return g


def default_neighbors(n: int) -> int:
    return max(1, min(10, n - 1))


def kernel_space_sq_dist(k) -> np.ndarray:
    """``K_ii + K_jj - 2 K_ij``, clamped at zero."""
    g = _gram(k)
    diag = np.diag(g)
    d2 = diag[:, None] + diag[None, :] - 2.0 * g
    d2 = 0.5 * (d2 + d2.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def _nearest(d2: np.ndarray, neighbors: int) -> np.ndarray:
    n = d2.shape[0]
    if not 1 <= neighbors <= n - 1:
        raise ValueError(f"neighbors must lie in [1, {n - 1}], got {neighbors}")
    masked = d2.copy()
    np.fill_diagonal(masked, np.inf)
    # stable sort keeps index order on ties
    return np.argsort(masked, axis=1, kind="stable")[:, :neighbors]


def heat_knn_graph(k, neighbors: int, sigma: float) -> NeighborGraph:
    """k-NN graph with heat-kernel weights, symmetrized by elementwise max."""
    if not sigma > 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    d2 = kernel_space_sq_dist(k)
    nn = _nearest(d2, neighbors)
    rows = np.repeat(np.arange(d2.shape[0]), neighbors)
    cols = nn.ravel()
    v = np.zeros_like(d2)
    v[rows, cols] = np.exp(-d2[rows, cols] / (2.0 * sigma * sigma))
    v = np.maximum(v, v.T)
    np.fill_diagonal(v, 0.0)
    return NeighborGraph(v, neighbors)


def degree_laplacian(g: NeighborGraph) -> LaplacianMatrix:
    v = np.asarray(g.weights, dtype=float)
    if not np.array_equal(v, v.T):
        raise GraphConstructionError("neighbour weight matrix is not symmetric")
    if np.any(v < 0):
        raise GraphConstructionError("neighbour weights must be nonnegative")
    lap = np.diag(v.sum(axis=1)) - v
    return LaplacianMatrix(lap, Recipe.LE_KNN)


def lle_weights(k, neighbors: int, reg: float = 1e-3) -> np.ndarray:
    """Sum-to-one reconstruction weights (row ``i`` rebuilds point ``i``).

    The local Gram of ``phi_i - phi_j`` over the neighbours of ``i`` is
    ``K_ii - K_ij - K_il + K_jl``, regularized by ``reg * trace``.
    """
    g = _gram(k)
    n = g.shape[0]
    nn = _nearest(kernel_space_sq_dist(g), neighbors)
    rows = np.arange(n)[:, None]
    gi = g[rows, nn]
    local = np.diagonal(g)[:, None, None] - gi[:, :, None] - gi[:, None, :] + g[nn[:, :, None], nn[:, None, :]]
    tr = np.trace(local, axis1=1, axis2=2)
    shift = np.where(tr > 0, reg * tr, reg)
    local[:, np.arange(neighbors), np.arange(neighbors)] += shift[:, None]
    try:
        sol = np.linalg.solve(local, np.ones((n, neighbors, 1)))[:, :, 0]
    except np.linalg.LinAlgError:
        bad = next(i for i in range(n) if np.linalg.matrix_rank(local[i]) < neighbors)
        raise GraphConstructionError(f"singular LLE system at point {bad}") from None
    total = sol.sum(axis=1)
    if not np.all(np.isfinite(total)) or np.any(total == 0.0):
        raise GraphConstructionError("degenerate LLE reconstruction weights")
    w = np.zeros((n, n))
    w[rows, nn] = sol / total[:, None]
    return w


def lle_laplacian(k, neighbors: int, reg: float = 1e-3) -> LaplacianMatrix:
    w = lle_weights(k, neighbors, reg)
    m = np.eye(w.shape[0]) - w
    lap = m.T @ m
    return LaplacianMatrix(0.5 * (lap + lap.T), Recipe.LLE)


def centering_laplacian(n: int) -> LaplacianMatrix:
    """``(1/N)(I - 11^T/N)``: the kernel-space covariance as a Laplacian."""
    if n < 1:
        raise ValueError("n must be positive")
    lap = (np.eye(n) - np.full((n, n), 1.0 / n)) / n
    return LaplacianMatrix(lap, Recipe.LDA_CENTERING)


def cluster_centering_laplacian(labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    n = labels.size
    same = labels[:, None] == labels[None, :]
    sizes = np.bincount(labels)[labels]
    return (np.eye(n) - same / sizes[None, :]) / n


def _kmeanspp(g: np.ndarray, clusters: int, rng: np.random.Generator) -> np.ndarray:
    n = g.shape[0]
    d2 = kernel_space_sq_dist(g)
    centers = [int(rng.integers(n))]
    closest = d2[centers[0]].copy()
    for _ in range(1, clusters):
        total = closest.sum()
        if total > 0:
            cdf = np.cumsum(closest)
            nxt = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), n - 1)
        else:
            free = np.setdiff1d(np.arange(n), centers)
            nxt = int(rng.choice(free))
        centers.append(nxt)
        closest = np.minimum(closest, d2[nxt])
    # initial assignment to the nearest seed point
    return np.argmin(d2[:, centers], axis=1)


def _center_dists(g: np.ndarray, labels: np.ndarray, clusters: int) -> np.ndarray:
    n = g.shape[0]
    onehot = np.zeros((n, clusters))
    onehot[np.arange(n), labels] = 1.0
    sizes = onehot.sum(axis=0)
    if np.any(sizes == 0):
        return None
    gc = g @ onehot
    cross = gc / sizes
    within = (onehot * gc).sum(axis=0) / sizes**2
    return np.diag(g)[:, None] - 2.0 * cross + within[None, :]


def kernel_kmeans(k, clusters: int, seed: int = 0, max_iter: int = 100):
    """Lloyd iterations of k-means in the kernel-induced space.

    Returns
    -------
    labels : ndarray of int, shape (N,)
    objective : list of float
        Within-cluster kernel-space scatter after each assignment step.
    """
    g = _gram(k)
    n = g.shape[0]
    if not 1 <= clusters <= n:
        raise ValueError(f"clusters must lie in [1, {n}], got {clusters}")
    if clusters == 1:
        return np.zeros(n, dtype=int), [float(np.trace(g) - g.sum() / n)]
    if clusters == n:
        return np.arange(n), [0.0]

    for attempt in range(2):
        rng = np.random.default_rng([seed, attempt])
        labels = _kmeanspp(g, clusters, rng)
        history = []
        for _ in range(max_iter):
            dist = _center_dists(g, labels, clusters)
            if dist is None:
                break
            history.append(float(dist[np.arange(n), labels].sum()))
            new = np.argmin(dist, axis=1)
            if np.array_equal(new, labels):
                break
            labels = new
        else:
            dist = _center_dists(g, labels, clusters)
        if dist is not None and np.bincount(labels, minlength=clusters).min() > 0:
            return labels, history
    raise GraphConstructionError(f"kernel k-means left an empty cluster (clusters={clusters}, seed={seed})")


def cda_laplacian(k, clusters: int, seed: int = 0) -> LaplacianMatrix:
    labels, _ = kernel_kmeans(k, clusters, seed)
    return LaplacianMatrix(cluster_centering_laplacian(labels), Recipe.CDA, clusters)


def zero_laplacian(n: int) -> LaplacianMatrix:
    return LaplacianMatrix(np.zeros((n, n)), Recipe.ZERO)


def build_laplacian(k: KernelMatrix, spec: GraphSpec) -> LaplacianMatrix:
    """Dispatch on ``spec.recipe``; the heat-kernel bandwidth is ``k.sigma``."""
    n = k.n
    if spec.recipe is Recipe.ZERO:
        return zero_laplacian(n)
    if spec.recipe is Recipe.LDA_CENTERING:
        return centering_laplacian(n)
    if spec.recipe is Recipe.CDA:
        return cda_laplacian(k, min(spec.clusters, n), spec.seed)
    neighbors = spec.neighbors if spec.neighbors is not None else default_neighbors(n)
    neighbors = min(neighbors, n - 1)
    if spec.recipe is Recipe.LE_KNN:
        return degree_laplacian(heat_knn_graph(k, neighbors, k.sigma))
    return lle_laplacian(k, neighbors, spec.reg)
