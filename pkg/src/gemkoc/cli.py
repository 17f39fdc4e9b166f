"""Command-line interface: ``fit``, ``predict``, ``benchmark`` and ``stats``.

Run configuration is an INI file::

    [run]
    manifest = datasets.ini
    classifiers = LMKOC-LLE_theta1, GMKOC-CDA_theta1
    folds = 5
    runs = 5
    seed = 0
    jobs = 1
    out = results

    [LMKOC-LLE_theta1]
    c = 2^-3..2^3
    lambda = 0.5, 1, 2
    depth = 1..3

Grid values are comma separated; ``a..b`` is an integer range and
``2^p..2^q`` a range of powers of two. Unlisted keys fall back to the
default grids.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import model as mk
from .classifiers import CLASSIFIERS, GridSpec, classifier, config_grid
from .data_io import MinMaxScaler, OneClassTask, load_tasks
from .evaluation import GridResult, ResultTable, grid_search, read_table, stats_report
from .exceptions import ConfigError, DataFormatError, GemkocError
from .persistence import load_model, save_model

log = logging.getLogger("gemkoc")


@dataclass
class RunConfig:
    manifest: Path | None = None
    classifiers: list[str] = field(default_factory=lambda: list(CLASSIFIERS))
    grids: dict[str, GridSpec] = field(default_factory=dict)
    folds: int = 5
    runs: int = 5
    seed: int = 0
    jobs: int = 1
    out: Path = Path("results")

    def grid(self, name: str) -> GridSpec:
        return self.grids.get(name, GridSpec())


def _parse_token(tok: str) -> list[float]:
    tok = tok.strip()
    if ".." in tok:
        lo, hi = (t.strip() for t in tok.split("..", 1))
        if lo.startswith("2^") and hi.startswith("2^"):
            return [2.0**p for p in range(int(lo[2:]), int(hi[2:]) + 1)]
        return [float(v) for v in range(int(lo), int(hi) + 1)]
    if tok.startswith("2^"):
        return [2.0 ** float(tok[2:])]
    return [float(tok)]


def parse_values(text: str) -> list[float]:
    try:
        out = [v for tok in text.split(",") if tok.strip() for v in _parse_token(tok)]
    except ValueError as exc:
        raise ConfigError(f"cannot parse value list {text!r}") from exc
    if not out:
        raise ConfigError("empty value list")
    return out


def _grid_from_section(sec) -> GridSpec:
    g = GridSpec()
    kw = {}
    if "c" in sec:
        kw["c"] = tuple(parse_values(sec["c"]))
    if "lambda" in sec:
        kw["lam"] = tuple(parse_values(sec["lambda"]))
    if "depth" in sec:
        kw["depth"] = tuple(int(v) for v in parse_values(sec["depth"]))
    if "clusters" in sec:
        kw["clusters"] = tuple(int(v) for v in parse_values(sec["clusters"]))
    if "neighbors" in sec:
        kw["neighbors"] = int(sec["neighbors"])
    if "eta" in sec:
        kw["eta"] = float(sec["eta"])
    if "r" in sec:
        kw["r"] = float(sec["r"])
    return replace(g, **kw)


def read_run_config(path) -> RunConfig:
    path = Path(path)
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str.lower
    if not cp.read(path):
        raise ConfigError(f"cannot read config {path}")
    cfg = RunConfig()
    if cp.has_section("run"):
        run = cp["run"]
        if "manifest" in run:
            m = Path(run["manifest"])
            cfg.manifest = m if m.is_absolute() else path.parent / m
        if "classifiers" in run:
            cfg.classifiers = [classifier(n).name for n in run["classifiers"].split(",") if n.strip()]
        cfg.folds = run.getint("folds", cfg.folds)
        cfg.runs = run.getint("runs", cfg.runs)
        cfg.seed = run.getint("seed", cfg.seed)
        cfg.jobs = run.getint("jobs", cfg.jobs)
        if "out" in run:
            o = Path(run["out"])
            cfg.out = o if o.is_absolute() else path.parent / o
    for name in cp.sections():
        if name == "run":
            continue
        try:
            cfg.grids[classifier(name).name] = _grid_from_section(cp[name])
        except ValueError as exc:
            raise ConfigError(f"section [{name}]: {exc}") from exc
    if cfg.folds < 2:
        raise ConfigError("folds must be at least 2")
    if cfg.runs < 1:
        raise ConfigError("runs must be at least 1")
    return cfg


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    for key in ("seed", "folds", "runs", "jobs"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    if getattr(args, "classifier", None):
        cfg.classifiers = [classifier(n).name for n in args.classifier]
    if getattr(args, "out", None) is not None:
        cfg.out = Path(args.out)
    if cfg.folds < 2:
        raise ConfigError("folds must be at least 2")
    return cfg


def _tasks(cfg: RunConfig) -> dict[str, OneClassTask]:
    if cfg.manifest is None:
        raise ConfigError("config has no [run] manifest")
    return load_tasks(cfg.manifest)


def _pick_task(tasks: dict[str, OneClassTask], name: str) -> OneClassTask:
    if name not in tasks:
        raise ConfigError(f"unknown task {name!r}; available: {', '.join(tasks)}")
    return tasks[name]


# --------------------------------------------------------------------------
# commands

def cmd_fit(args) -> int:
    cfg = _apply_overrides(read_run_config(args.config), args)
    task = _pick_task(_tasks(cfg), args.task)
    name = cfg.classifiers[0]
    spec = classifier(name)
    grid = config_grid(spec, cfg.grid(name), cfg.seed)
    if len(grid) == 1:
        chosen = grid[0]
    else:
        log.info("selecting %s hyperparameters for %s over %d configs", name, task.name, len(grid))
        res = grid_search(task, grid, cfg.folds, cfg.runs, cfg.seed, cfg.jobs)
        chosen = res.best.config
        print(f"cv_gmean: {res.mean:.2f} ({res.std:.2f})")
    scaler = MinMaxScaler.fit(task.targets)
    model = mk.fit(scaler.transform(task.targets), chosen, scaler=scaler)
    save_model(model, args.out)
    hp = chosen.layer(1)
    print(f"classifier: {name}")
    print(f"task: {task.name}")
    print(f"depth: {model.depth}  C: {hp.c:g}  lambda: {hp.lam:g}"
          + (f"  clusters: {hp.graph.clusters}" if hp.graph.clusters else ""))
    print(f"threshold ({model.threshold_kind.value}): {model.threshold:.10g}")
    for h, layer in enumerate(model.layers, start=1):
        role = "head" if h == model.depth else "encoder"
        print(f"layer {h} ({role}): sigma={layer.sigma:.6g} residual={layer.residual:.3e}")
    return 0


def _read_features(path, label_column, delimiter: str, header: bool) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r and any(c.strip() for c in r)]
    if header and rows:
        rows = rows[1:]
    feats = []
    for lineno, row in enumerate(rows, start=2 if header else 1):
        if label_column is not None:
            col = label_column if label_column >= 0 else len(row) + label_column
            row = [v for j, v in enumerate(row) if j != col]
        try:
            feats.append([float(v) for v in row])
        except ValueError as exc:
            raise DataFormatError(f"{path}: row {lineno}: {exc}") from None
    if feats and len({len(f) for f in feats}) != 1:
        raise DataFormatError(f"{path}: rows have differing field counts")
    return np.array(feats, dtype=float)


def cmd_predict(args) -> int:
    model = load_model(args.model)
    x = _read_features(args.input, args.label_column, args.delimiter, args.header)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row_index", "score", "label"])
    if x.size:
        for i, v in enumerate(mk.predict(model, x)):
            w.writerow([i, repr(v.score), v.label.value])
    Path(args.out).write_text(buf.getvalue(), encoding="utf-8")
    return 0


def run_benchmark(cfg: RunConfig, task_names: list[str] | None = None):
    tasks = _tasks(cfg)
    if task_names:
        tasks = {n: _pick_task(tasks, n) for n in task_names}
    names = list(tasks)
    means = np.zeros((len(cfg.classifiers), len(names)))
    stds = np.zeros_like(means)
    results: list[tuple[str, GridResult]] = []
    for i, cname in enumerate(cfg.classifiers):
        grid = config_grid(classifier(cname), cfg.grid(cname), cfg.seed)
        for j, tname in enumerate(names):
            log.info("%s on %s: %d configs x %d runs x %d folds", cname, tname, len(grid), cfg.runs, cfg.folds)
            res = grid_search(tasks[tname], grid, cfg.folds, cfg.runs, cfg.seed, cfg.jobs)
            means[i, j], stds[i, j] = res.mean, res.std
            results.append((cname, res))
    return ResultTable(list(cfg.classifiers), names, means, stds), results


def _best_configs_csv(results: list[tuple[str, GridResult]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["classifier", "task", "depth", "c", "lambda", "clusters", "gmean_mean", "gmean_std",
                "max_residual"])
    for cname, res in results:
        cfg = res.best.config
        hp = cfg.layer(1)
        w.writerow([cname, res.task, cfg.depth, f"{hp.c:g}", f"{hp.lam:g}", hp.graph.clusters or "",
                    f"{res.mean:.2f}", f"{res.std:.2f}", f"{res.max_residual:.3e}"])
    return buf.getvalue()


def cmd_benchmark(args) -> int:
    cfg = _apply_overrides(read_run_config(args.config), args)
    table, results = run_benchmark(cfg, args.task)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "gmean_table.csv").write_text(table.to_csv(), encoding="utf-8")
    (out / "gmean_table.txt").write_text(table.to_text(), encoding="utf-8")
    (out / "best_configs.csv").write_text(_best_configs_csv(results), encoding="utf-8")
    report = stats_report(table).to_text()
    (out / "stats.txt").write_text(report, encoding="utf-8")
    sys.stdout.write(table.to_text())
    sys.stdout.write("\n" + report)
    return 0


def cmd_stats(args) -> int:
    table = read_table(args.table)
    report = stats_report(table, alpha=args.alpha).to_text()
    sys.stdout.write(report)
    if args.out:
        Path(args.out).write_text(report, encoding="utf-8")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gemkoc", description="Graph-embedded multi-layer KRR one-class classifiers")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit one classifier on all targets of one task")
    f.add_argument("--config", required=True)
    f.add_argument("--task", required=True)
    f.add_argument("--classifier", action="append", help="classifier name (default: first in config)")
    f.add_argument("--out", required=True, help="model file to write")
    f.add_argument("--seed", type=int)
    f.add_argument("--folds", type=int)
    f.add_argument("--runs", type=int)
    f.add_argument("--jobs", type=int)
    f.set_defaults(func=cmd_fit)

    pr = sub.add_parser("predict", help="score a CSV with a saved model")
    pr.add_argument("--model", required=True)
    pr.add_argument("--input", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--label-column", type=int, default=None, help="column to drop before scoring")
    pr.add_argument("--delimiter", default=",")
    pr.add_argument("--header", action="store_true", help="input has a header row")
    pr.set_defaults(func=cmd_predict)

    b = sub.add_parser("benchmark", help="cross-validated grid search over every task and classifier")
    b.add_argument("--config", required=True)
    b.add_argument("--task", action="append", help="restrict to these tasks")
    b.add_argument("--classifier", action="append")
    b.add_argument("--seed", type=int)
    b.add_argument("--folds", type=int)
    b.add_argument("--runs", type=int)
    b.add_argument("--jobs", type=int)
    b.add_argument("--out")
    b.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("stats", help="eta_m / eta_p / Friedman ranks / Iman-Davenport from a Gmean table")
    s.add_argument("table")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--out")
    s.set_defaults(func=cmd_stats)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (GemkocError, ValueError, OSError) as exc:
        print(f"gemkoc {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
