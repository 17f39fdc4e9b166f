"""Named classifier variants and their default hyperparameter grids."""

from __future__ import annotations

from dataclasses import dataclass, field

from .exceptions import ConfigError
from .graphs import GraphSpec, Recipe
from .layers import LayerHyperparams
from .model import MkocConfig, ThresholdKind

POW2 = tuple(2.0**p for p in range(-3, 4))


@dataclass(frozen=True)
class ClassifierSpec:
    name: str
    recipe: Recipe
    threshold: ThresholdKind
    multilayer: bool = False
    tunes_lambda: bool = True


@dataclass(frozen=True)
class GridSpec:
    c: tuple[float, ...] = POW2
    lam: tuple[float, ...] = POW2
    depth: tuple[int, ...] = (1, 2, 3, 4, 5)
    clusters: tuple[int, ...] = tuple(range(2, 21))
    neighbors: int | None = None
    eta: float = 0.05
    r: float = 1.0
    extra: dict = field(default_factory=dict, compare=False)


_T1, _T2 = ThresholdKind.THETA1, ThresholdKind.THETA2

CLASSIFIERS = {
    s.name: s
    for s in [
        ClassifierSpec("KOC", Recipe.ZERO, _T1, tunes_lambda=False),
        ClassifierSpec("LKOC-LE", Recipe.LE_KNN, _T1),
        ClassifierSpec("LKOC-LLE", Recipe.LLE, _T1),
        ClassifierSpec("GKOC-LDA", Recipe.LDA_CENTERING, _T1),
        ClassifierSpec("GKOC-CDA", Recipe.CDA, _T1),
        ClassifierSpec("LMKOC-LLE_theta1", Recipe.LLE, _T1, multilayer=True),
        ClassifierSpec("LMKOC-LLE_theta2", Recipe.LLE, _T2, multilayer=True),
        ClassifierSpec("GMKOC-CDA_theta1", Recipe.CDA, _T1, multilayer=True),
        ClassifierSpec("GMKOC-CDA_theta2", Recipe.CDA, _T2, multilayer=True),
    ]
}


def classifier(name: str) -> ClassifierSpec:
    """Look up a variant; accepts ``θ`` for ``theta`` and any letter case."""
    key = name.strip().replace("θ", "theta").replace("\\theta", "theta").upper()
    for spec in CLASSIFIERS.values():
        if spec.name.upper() == key:
            return spec
    raise ConfigError(f"unknown classifier {name!r}; choose from {', '.join(CLASSIFIERS)}")


def make_config(spec: ClassifierSpec, c: float, lam: float = 1.0, depth: int = 1, clusters: int | None = None,
                neighbors: int | None = None, eta: float = 0.05, r: float = 1.0, seed: int = 0) -> MkocConfig:
    if not spec.multilayer and depth != 1:
        raise ConfigError(f"{spec.name} is single-layer; depth must be 1")
    if spec.recipe is Recipe.CDA and clusters is None:
        raise ConfigError(f"{spec.name} needs a cluster count")
    graph = GraphSpec(spec.recipe, neighbors=neighbors,
                      clusters=clusters if spec.recipe is Recipe.CDA else None)
    hp = LayerHyperparams(c=c, lam=lam if spec.tunes_lambda else 1.0, graph=graph)
    return MkocConfig(depth=depth, layers=hp, threshold=spec.threshold, eta=eta, r=r, seed=seed)


def config_grid(spec: ClassifierSpec, grid: GridSpec | None = None, seed: int = 0) -> list[MkocConfig]:
    """All configs of ``spec`` over ``grid``; shallower models come first."""
    grid = grid or GridSpec()
    depths = grid.depth if spec.multilayer else (1,)
    lams = grid.lam if spec.tunes_lambda else (1.0,)
    clusters = grid.clusters if spec.recipe is Recipe.CDA else (None,)
    return [
        make_config(spec, c, lam, d, k, grid.neighbors, grid.eta, grid.r, seed)
        for d in depths
        for c in grid.c
        for lam in lams
        for k in clusters
    ]
