"""Gmean scoring, cross-validated grid search and Friedman-rank statistics."""

from __future__ import annotations

import csv
import io
import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import special, stats

from . import model as mk
from .data_io import FoldSplit, OneClassTask, kfold_split, scale_fold
from .layers import fit_autoencoder_layer, transform
from .exceptions import DataFormatError, DegenerateDataError, GraphConstructionError, IllConditionedSystemError

log = logging.getLogger(__name__)

# failures that disqualify a hyperparameter setting instead of aborting the run
RECOVERABLE = (IllConditionedSystemError, DegenerateDataError, GraphConstructionError)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def gmean(c: ConfusionCounts) -> float:
    """``sqrt(precision * recall)`` with the target class as positive; 0/0 counts as 0."""
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else 0.0
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else 0.0
    return math.sqrt(precision * recall)


def evaluate_fold(model: mk.MkocModel, fold: FoldSplit) -> ConfusionCounts:
    t = mk.is_target(model, fold.test_targets) if fold.test_targets.shape[0] else np.zeros(0, bool)
    o = mk.is_target(model, fold.test_outliers) if fold.test_outliers.shape[0] else np.zeros(0, bool)
    tp = int(t.sum())
    fp = int(o.sum())
    return ConfusionCounts(tp=tp, fp=fp, fn=int(t.size - tp), tn=int(o.size - fp))


# --------------------------------------------------------------------------
# result tables

@dataclass
class ResultTable:
    """Rows are classifiers, columns datasets; cells are Gmean in percent."""

    classifiers: list[str]
    datasets: list[str]
    mean: np.ndarray
    std: np.ndarray | None = None

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        if self.mean.shape != (len(self.classifiers), len(self.datasets)):
            raise ValueError(f"table shape {self.mean.shape} does not match labels")
        if self.std is not None:
            self.std = np.asarray(self.std, dtype=float)

    def row(self, classifier: str) -> np.ndarray:
        try:
            return self.mean[self.classifiers.index(classifier)]
        except ValueError:
            raise KeyError(f"unknown classifier {classifier!r}") from None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["classifier", *self.datasets])
        for i, name in enumerate(self.classifiers):
            w.writerow([name, *(self._cell(i, j) for j in range(len(self.datasets)))])
        return buf.getvalue()

    def to_text(self) -> str:
        header = ["One-class classifier", *self.datasets]
        body = [[name, *(self._cell(i, j) for j in range(len(self.datasets)))]
                for i, name in enumerate(self.classifiers)]
        widths = [max(len(r[j]) for r in [header, *body]) for j in range(len(header))]
        lines = ["  ".join(c.ljust(widths[0]) if j == 0 else c.rjust(widths[j]) for j, c in enumerate(r))
                 for r in [header, *body]]
        return "\n".join(lines) + "\n"

    def _cell(self, i: int, j: int) -> str:
        if self.std is None:
            return f"{self.mean[i, j]:.2f}"
        return f"{self.mean[i, j]:.2f} ({self.std[i, j]:.2f})"


_CELL = re.compile(r"^\s*([-+0-9.eE]+)\s*(?:\(\s*([-+0-9.eE]+)\s*\))?\s*$")


def read_table(path) -> ResultTable:
    """Read a classifier x dataset CSV whose cells are ``mean`` or ``mean (std)``."""
    with Path(path).open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise DataFormatError(f"{path}: need a header row and at least one classifier row")
    datasets = [c.strip() for c in rows[0][1:]]
    names, means, stds, have_std = [], [], [], True
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(datasets) + 1:
            raise DataFormatError(f"{path}: row {lineno} has {len(row) - 1} cells, expected {len(datasets)}")
        names.append(row[0].strip())
        m_row, s_row = [], []
        for cell in row[1:]:
            match = _CELL.match(cell)
            if not match:
                raise DataFormatError(f"{path}: row {lineno}: cannot parse cell {cell!r}")
            m_row.append(float(match.group(1)))
            if match.group(2) is None:
                have_std = False
            else:
                s_row.append(float(match.group(2)))
        means.append(m_row)
        stds.append(s_row)
    return ResultTable(names, datasets, np.array(means), np.array(stds) if have_std else None)


# --------------------------------------------------------------------------
# aggregate statistics

def eta_m(t: ResultTable, classifier: str) -> float:
    """Mean Gmean of one classifier across datasets."""
    row = t.row(classifier)
    if np.any(np.isnan(row)):
        raise ValueError(f"{classifier}: missing cells")
    return float(np.mean(row))


def eta_p(t: ResultTable, classifier: str) -> float:
    """Mean over datasets of the classifier's Gmean as a percentage of the column best."""
    best = t.mean.max(axis=0)
    if np.any(best <= 0):
        raise ValueError("a dataset column has maximum Gmean 0")
    return float(np.mean(100.0 * t.row(classifier) / best))


def rank_matrix(t: ResultTable, decimals: int = 2) -> np.ndarray:
    """Per-dataset ranks (1 = best, ties averaged), shape classifiers x datasets."""
    vals = np.round(t.mean, decimals)
    return np.column_stack([stats.rankdata(-vals[:, j], method="average") for j in range(vals.shape[1])])


def friedman_ranks(t: ResultTable, decimals: int = 2) -> dict[str, float]:
    mean_ranks = rank_matrix(t, decimals).mean(axis=1)
    return dict(zip(t.classifiers, map(float, mean_ranks)))


def friedman_chi2(mean_ranks: Sequence[float], n_datasets: int) -> float:
    r = np.asarray(mean_ranks, dtype=float)
    k = r.size
    return float(12.0 * n_datasets / (k * (k + 1)) * (np.sum(r**2) - k * (k + 1) ** 2 / 4.0))


def iman_davenport(chi2_f: float, n_datasets: int, k_classifiers: int) -> float:
    n, k = n_datasets, k_classifiers
    denom = n * (k - 1) - chi2_f
    if denom <= 0:
        raise ValueError("Iman-Davenport denominator is not positive")
    return float((n - 1) * chi2_f / denom)


def f_sf(x: float, d1: float, d2: float) -> float:
    """Upper tail of the F(d1, d2) distribution via the regularized incomplete beta."""
    if x <= 0:
        return 1.0
    return float(special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x)))


@dataclass
class StatsReport:
    eta_m: dict[str, float]
    eta_p: dict[str, float]
    eta_f: dict[str, float]
    chi2_f: float
    f_f: float
    df: tuple[int, int]
    p_value: float
    chi2_p_value: float
    critical_value: float
    alpha: float = 0.05

    def to_text(self) -> str:
        names = sorted(self.eta_f, key=lambda n: (self.eta_f[n], n))
        width = max(len("classifier"), *(len(n) for n in names))
        out = [f"{'classifier'.ljust(width)}  {'eta_f':>6}  {'eta_m':>6}  {'eta_p':>6}"]
        for n in names:
            out.append(f"{n.ljust(width)}  {self.eta_f[n]:6.2f}  {self.eta_m[n]:6.2f}  {self.eta_p[n]:6.2f}")
        out.append("")
        out.append(f"Friedman chi2_F = {self.chi2_f:.4f} (p = {self.chi2_p_value:.4e})")
        out.append(f"Iman-Davenport F_F = {self.f_f:.4f} with df = ({self.df[0]}, {self.df[1]})")
        out.append(f"p-value = {self.p_value:.4e}")
        out.append(f"critical value at alpha = {self.alpha:g}: {self.critical_value:.4f}")
        verdict = "reject" if self.f_f > self.critical_value else "cannot reject"
        out.append(f"null hypothesis of equal mean ranks: {verdict}")
        return "\n".join(out) + "\n"


def stats_report(t: ResultTable, alpha: float = 0.05, decimals: int = 2) -> StatsReport:
    k, n = t.mean.shape
    ranks = friedman_ranks(t, decimals)
    chi2 = friedman_chi2(list(ranks.values()), n)
    df = (k - 1, (k - 1) * (n - 1))
    if k < 2:
        f_f, p, crit, chi2_p = 0.0, 1.0, float("nan"), 1.0
    else:
        f_f = iman_davenport(chi2, n, k) if n > 1 else 0.0
        p = f_sf(f_f, *df) if df[1] > 0 else 1.0
        crit = float(stats.f.isf(alpha, *df)) if df[1] > 0 else float("nan")
        chi2_p = float(stats.chi2.sf(chi2, k - 1))
    return StatsReport(
        eta_m={c: eta_m(t, c) for c in t.classifiers},
        eta_p={c: eta_p(t, c) for c in t.classifiers},
        eta_f=ranks,
        chi2_f=chi2,
        f_f=f_f,
        df=df,
        p_value=p,
        chi2_p_value=chi2_p,
        critical_value=crit,
        alpha=alpha,
    )


# --------------------------------------------------------------------------
# cross-validated grid search

@dataclass
class ConfigScore:
    config: mk.MkocConfig
    gmeans: np.ndarray  # one per (run, fold); NaN where the fit failed
    max_residual: float = 0.0

    @property
    def ok(self) -> bool:
        return not np.any(np.isnan(self.gmeans))

    @property
    def mean(self) -> float:
        return float(np.mean(self.gmeans)) if self.ok else float("-inf")


@dataclass
class GridResult:
    task: str
    best: ConfigScore
    scores: list[ConfigScore] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return 100.0 * float(np.mean(self.best.gmeans))

    @property
    def std(self) -> float:
        return 100.0 * float(np.std(self.best.gmeans))

    @property
    def max_residual(self) -> float:
        return max((s.max_residual for s in self.scores), default=0.0)


def make_folds(task: OneClassTask, k: int = 5, runs: int = 1, seed: int = 0) -> list[FoldSplit]:
    """``runs`` independent k-fold partitions (shuffle seed ``seed + run``), each scaled per fold."""
    return [scale_fold(f) for run in range(runs) for f in kfold_split(task, k, seed + run)]


def _depth_group_key(cfg: mk.MkocConfig):
    return (cfg.layers, cfg.threshold, cfg.eta, cfg.r, cfg.seed)


def _score_group(cfgs: list[mk.MkocConfig], folds: list[FoldSplit]) -> list[ConfigScore]:
    """Score configs that differ only in depth, sharing the encoder stack across depths."""
    deepest = max(c.depth for c in cfgs)
    base = max(cfgs, key=lambda c: c.depth)
    g = np.full((len(cfgs), len(folds)), np.nan)
    resid = np.zeros(len(cfgs))
    for fi, fold in enumerate(folds):
        encoders, reps = [], [fold.train_targets]
        failed_from = deepest
        for h in range(1, deepest):
            try:
                layer = fit_autoencoder_layer(reps[-1], base.layer(h), layer=h)
            except RECOVERABLE as exc:
                log.debug("encoder %d failed: %s", h, exc)
                failed_from = h
                break
            encoders.append(layer)
            reps.append(transform(layer, layer.train_inputs))
        for ci, cfg in enumerate(cfgs):
            if cfg.depth > failed_from:
                continue
            try:
                model = mk.fit_head(encoders[: cfg.depth - 1], reps[cfg.depth - 1], cfg)
            except RECOVERABLE as exc:
                log.debug("head at depth %d failed: %s", cfg.depth, exc)
                continue
            resid[ci] = max(resid[ci], max(layer.residual for layer in model.layers))
            g[ci, fi] = gmean(evaluate_fold(model, fold))
    return [ConfigScore(cfg, g[i], resid[i]) for i, cfg in enumerate(cfgs)]


def _score_unit(args):
    cfgs, folds = args
    return _score_group(cfgs, folds)


def grid_search(task: OneClassTask, grid: Sequence[mk.MkocConfig], k: int = 5, runs: int = 1,
                seed: int = 0, jobs: int = 1, folds: list[FoldSplit] | None = None) -> GridResult:
    """Exhaustive search; the best config maximizes mean Gmean over runs x folds.

    Ties go to the config that appears first in ``grid``. Configs whose fit
    fails on any fold are disqualified.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty hyperparameter grid")
    if folds is None:
        folds = make_folds(task, k, runs, seed)

    groups: dict = {}
    for i, cfg in enumerate(grid):
        groups.setdefault(_depth_group_key(cfg), []).append(i)
    units = [([grid[i] for i in idx], folds) for idx in groups.values()]
    if jobs > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_score_unit, units, chunksize=max(1, len(units) // (4 * jobs))))
    else:
        results = [_score_unit(u) for u in units]

    scores: list[ConfigScore | None] = [None] * len(grid)
    for idx, res in zip(groups.values(), results):
        for i, sc in zip(idx, res):
            scores[i] = sc
    best = scores[0]
    for sc in scores[1:]:
        if sc.mean > best.mean:
            best = sc
    if not best.ok:
        raise IllConditionedSystemError(f"{task.name}: every configuration in the grid failed to fit")
    return GridResult(task.name, best, scores)
