"""CSV ingestion, one-class task construction, min-max scaling and k-fold splits."""

from __future__ import annotations

import configparser
import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DataFormatError


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    name: str
    class_names: tuple[str, ...]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


@dataclass(frozen=True)
class OneClassTask:
    name: str
    targets: np.ndarray
    outliers: np.ndarray


@dataclass(frozen=True)
class FoldSplit:
    index: int
    train_targets: np.ndarray
    test_targets: np.ndarray
    test_outliers: np.ndarray

    @property
    def n_test(self) -> int:
        return self.test_targets.shape[0] + self.test_outliers.shape[0]


@dataclass(frozen=True)
class MinMaxScaler:
    """Per-column ``(x - lo) / span``; constant columns have ``span == 0`` and map to 0."""

    lo: np.ndarray
    span: np.ndarray

    @classmethod
    def fit(cls, train) -> "MinMaxScaler":
        train = np.asarray(train, dtype=float)
        if train.ndim != 2 or train.shape[0] == 0:
            raise ValueError("scaler needs a nonempty 2-D training matrix")
        lo = train.min(axis=0)
        return cls(lo, train.max(axis=0) - lo)

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        safe = np.where(self.span > 0, self.span, 1.0)
        out = (x - self.lo) / safe
        out[:, self.span == 0] = 0.0
        return out


def normalize_minmax(train, apply_to) -> np.ndarray:
    return MinMaxScaler.fit(train).transform(apply_to)


def load_csv(path, label_column: int | str = -1, delimiter: str = ",", header: bool = False,
             name: str | None = None) -> LabeledDataset:
    """Read a delimited numeric file with one label column.

    Class strings are mapped to dense ids in lexicographic order. A string
    ``label_column`` requires ``header=True``.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    first_line = 1
    if header:
        head = [c.strip() for c in rows[0]]
        rows = rows[1:]
        first_line = 2
        if isinstance(label_column, str):
            if label_column not in head:
                raise DataFormatError(f"{path}: no label column named {label_column!r}")
            label_column = head.index(label_column)
    elif isinstance(label_column, str):
        try:
            label_column = int(label_column)
        except ValueError:
            raise DataFormatError(f"{path}: named label column {label_column!r} needs a header row") from None
    if not rows:
        raise DataFormatError(f"{path}: no data rows")

    width = len(rows[0])
    col = label_column if label_column >= 0 else width + label_column
    if not 0 <= col < width:
        raise DataFormatError(f"{path}: label column {label_column} out of range for {width} columns")
    feats, labels = [], []
    for lineno, row in enumerate(rows, start=first_line):
        if len(row) != width:
            raise DataFormatError(f"{path}: row {lineno} has {len(row)} fields, expected {width}")
        labels.append(row[col].strip())
        try:
            feats.append([float(v) for j, v in enumerate(row) if j != col])
        except ValueError as exc:
            raise DataFormatError(f"{path}: row {lineno}: non-numeric feature ({exc})") from None
    x = np.asarray(feats, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DataFormatError(f"{path}: non-finite feature values")
    classes = tuple(sorted(set(labels)))
    ids = {c: i for i, c in enumerate(classes)}
    y = np.array([ids[c] for c in labels], dtype=int)
    return LabeledDataset(x, y, name or path.stem, classes)


def make_oneclass_tasks(ds: LabeledDataset) -> list[OneClassTask]:
    """One task per class: that class as targets, every other class as outliers."""
    if ds.n_classes < 2:
        raise DataFormatError(f"{ds.name}: one-class tasks need at least two classes")
    return [
        OneClassTask(f"{ds.name}({c + 1})", ds.features[ds.labels == c], ds.features[ds.labels != c])
        for c in range(ds.n_classes)
    ]


def kfold_split(task: OneClassTask, k: int = 5, seed: int = 0) -> list[FoldSplit]:
    """Shuffle targets and outliers with ``seed`` and cut each into ``k`` folds.

    Fold ``i`` trains on the targets outside fold ``i`` and tests on fold
    ``i``'s targets and outliers. Outliers never enter a training set.
    """
    if k < 2:
        raise ValueError(f"need k >= 2 folds, got {k}")
    n_t, n_o = task.targets.shape[0], task.outliers.shape[0]
    if n_t < k or n_o < k:
        raise DataFormatError(f"{task.name}: {n_t} targets / {n_o} outliers is too few for {k} folds")
    rng = np.random.default_rng(seed)
    t_parts = np.array_split(rng.permutation(n_t), k)
    o_parts = np.array_split(rng.permutation(n_o), k)
    folds = []
    for i in range(k):
        train_idx = np.sort(np.concatenate([t_parts[j] for j in range(k) if j != i]))
        folds.append(FoldSplit(
            i,
            task.targets[train_idx],
            task.targets[np.sort(t_parts[i])],
            task.outliers[np.sort(o_parts[i])],
        ))
    return folds


def scale_fold(fold: FoldSplit) -> FoldSplit:
    """Min-max scale a fold with parameters fitted on its training targets only."""
    sc = MinMaxScaler.fit(fold.train_targets)
    return FoldSplit(fold.index, sc.transform(fold.train_targets), sc.transform(fold.test_targets),
                     sc.transform(fold.test_outliers))


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    path: Path
    label_column: int | str
    delimiter: str = ","
    header: bool = False

    def load(self) -> LabeledDataset:
        return load_csv(self.path, self.label_column, self.delimiter, self.header, self.name)


_DELIMITERS = {"comma": ",", "tab": "\t", "semicolon": ";", "space": " ", "whitespace": " "}


def read_manifest(path) -> list[ManifestEntry]:
    """Parse a dataset manifest: one ``[name]`` section per dataset.

    Keys: ``path`` (relative to the manifest), ``label_column`` (index or
    header name, default -1), ``delimiter`` (a character or one of comma,
    tab, semicolon, space), ``header`` (bool, default false).
    """
    path = Path(path)
    cp = configparser.ConfigParser(interpolation=None)
    if not cp.read(path):
        raise DataFormatError(f"cannot read manifest {path}")
    entries = []
    for name in cp.sections():
        sec = cp[name]
        if "path" not in sec:
            raise DataFormatError(f"manifest {path}: dataset {name!r} has no path")
        label = sec.get("label_column", "-1").strip()
        label = int(label) if label.lstrip("-").isdigit() else label
        delim = sec.get("delimiter", ",")
        delim = _DELIMITERS.get(delim.strip().lower(), delim) if delim.strip() else " "
        data_path = Path(sec["path"])
        if not data_path.is_absolute():
            data_path = path.parent / data_path
        entries.append(ManifestEntry(name, data_path, label, delim, sec.getboolean("header", False)))
    return entries


def load_tasks(manifest) -> dict[str, OneClassTask]:
    """All one-class tasks of every dataset in the manifest, keyed by task name."""
    tasks = {}
    for entry in read_manifest(manifest):
        for task in make_oneclass_tasks(entry.load()):
            tasks[task.name] = task
    return tasks
