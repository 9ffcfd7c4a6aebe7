"""Result analyses: label comorbidity, cross-task prediction, input ablation and contribution ratios."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .crossmodal import DEFAULT_SIGN
from .dataset import DISORDERS, TASKS, Dataset, check_task
from .embrace import dock, renormalize_p
from .evalharness import CVResult, confusion_matrix, cross_validate, metrics, stratified_folds
from .pipeline import FusionLayout, RawFeatures
from .trainer import TrainConfig

COMORBIDITY_MODES = ("conditional", "jaccard")


def _fmt(v):
    return repr(float(v))


def _write_matrix_csv(path, corner, rows, cols, M):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([corner, *cols])
        for name, row in zip(rows, M):
            w.writerow([name, *(_fmt(v) for v in row)])


def _json_value(v):
    v = float(v)
    return None if np.isnan(v) else v


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# comorbidity
# ---------------------------------------------------------------------------


@dataclass
class ComorbidityMatrix:
    matrix: np.ndarray  # NaN marks an undefined entry
    tasks: tuple
    mode: str

    def write_csv(self, path):
        _write_matrix_csv(path, "task", self.tasks, self.tasks, self.matrix)

    def to_dict(self):
        return {"mode": self.mode, "tasks": list(self.tasks),
                "matrix": [[_json_value(v) for v in row] for row in self.matrix]}

    def write_json(self, path):
        _write_json(path, self.to_dict())


def comorbidity(dataset: Dataset, mode: str = "conditional", tasks=DISORDERS) -> ComorbidityMatrix:
    """Co-occurrence of positive labels between disorders.

    ``conditional``: ``M[i, j] = |i and j| / |j|``, the share of task-j
    positives that are also task-i positive. ``jaccard``: ``|i and j| / |i or j|``.
    Entries with an empty denominator are NaN.
    """
    if mode not in COMORBIDITY_MODES:
        raise ValueError(f"comorbidity mode must be one of {COMORBIDITY_MODES}")
    for t in tasks:
        check_task(t)
    L = np.array([dataset.labels(t) for t in tasks], dtype=bool)
    n = len(tasks)
    M = np.full((n, n), np.nan)
    for i in range(n):
        for j in range(n):
            both = np.count_nonzero(L[i] & L[j])
            denom = np.count_nonzero(L[j]) if mode == "conditional" else np.count_nonzero(L[i] | L[j])
            if denom:
                M[i, j] = both / denom
    if np.isnan(M).any():
        warnings.warn("comorbidity has undefined entries (no positives)", RuntimeWarning, stacklevel=2)
    return ComorbidityMatrix(M, tuple(tasks), mode)


# ---------------------------------------------------------------------------
# cross prediction
# ---------------------------------------------------------------------------


@dataclass
class CrossPredictionMatrix:
    matrix: np.ndarray  # [i, j]: model trained on train_tasks[i], scored on eval_tasks[j]
    train_tasks: tuple
    eval_tasks: tuple
    results: dict = field(default_factory=dict, repr=False)

    def write_csv(self, path):
        _write_matrix_csv(path, "train_task", self.train_tasks, self.eval_tasks, self.matrix)

    def to_dict(self):
        return {"train_tasks": list(self.train_tasks), "eval_tasks": list(self.eval_tasks),
                "matrix": self.matrix.tolist()}

    def write_json(self, path):
        _write_json(path, self.to_dict())


def score_against(cv: CVResult, labels) -> float:
    """Mean per-fold accuracy of ``cv``'s held-out predictions against ``labels``."""
    labels = np.asarray(labels)
    accs = [metrics(confusion_matrix(labels[fr.val_rows], fr.preds))["accuracy"] for fr in cv.fold_results]
    return float(np.mean(accs))


def cross_prediction(dataset: Dataset, cfg: TrainConfig = None, train_tasks=TASKS, eval_tasks=TASKS,
                     k: int = 10, seed: int = None, workers: int = 1, sign: float = DEFAULT_SIGN,
                     raw: RawFeatures = None) -> CrossPredictionMatrix:
    """Train on each task in turn and score the held-out predictions against every task.

    Each row reuses one :func:`cross_validate` run, so the diagonal equals the
    standalone CV accuracy.
    """
    raw = raw or RawFeatures.from_dataset(dataset)
    labels = {t: dataset.labels(t) for t in eval_tasks}
    M = np.empty((len(train_tasks), len(eval_tasks)))
    results = {}
    for i, ti in enumerate(train_tasks):
        cv = cross_validate(dataset, ti, cfg, k=k, seed=seed, sign=sign, workers=workers, raw=raw)
        results[ti] = cv
        for j, tj in enumerate(eval_tasks):
            M[i, j] = score_against(cv, labels[tj])
    return CrossPredictionMatrix(M, tuple(train_tasks), tuple(eval_tasks), results)


# ---------------------------------------------------------------------------
# ablation
# ---------------------------------------------------------------------------


@dataclass
class AblationReport:
    task: str
    full: dict  # metric -> mean over folds, full model
    removed: dict  # input name -> metric -> mean over folds without that input

    @property
    def deltas(self):
        return {name: {m: r[m] - self.full[m] for m in ("accuracy", "f1")} for name, r in self.removed.items()}

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["task", "removed", "accuracy", "f1", "delta_accuracy", "delta_f1"])
            w.writerow([self.task, "", _fmt(self.full["accuracy"]), _fmt(self.full["f1"]), _fmt(0.0), _fmt(0.0)])
            d = self.deltas
            for name, r in self.removed.items():
                w.writerow([self.task, name, _fmt(r["accuracy"]), _fmt(r["f1"]),
                            _fmt(d[name]["accuracy"]), _fmt(d[name]["f1"])])

    def to_dict(self):
        return {"task": self.task, "full": self.full, "removed": self.removed, "deltas": self.deltas}

    def write_json(self, path):
        _write_json(path, self.to_dict())


def _means(cv: CVResult):
    agg = cv.report.aggregate()
    return {m: agg[m]["mean"] for m in ("accuracy", "f1")}


def ablation(dataset: Dataset, task: str, cfg: TrainConfig = None, inputs=None, k: int = 10, seed: int = None,
             workers: int = 1, sign: float = DEFAULT_SIGN, raw: RawFeatures = None) -> AblationReport:
    """Drop each fusion input in turn and rerun CV with the same folds and seeds.

    Dropping a single modality also rebuilds both cross-modal inputs from the
    remaining modalities, so its information cannot leak back in.
    """
    check_task(task)
    cfg = (cfg or TrainConfig()).validate()
    seed = cfg.seed if seed is None else seed
    raw = raw or RawFeatures.from_dataset(dataset)
    full_layout = FusionLayout()
    inputs = full_layout.names if inputs is None else tuple(inputs)
    assignment = stratified_folds(dataset.labels(task), k, seed)
    common = dict(cfg=cfg, seed=seed, sign=sign, workers=workers, raw=raw, assignment=assignment)
    full = _means(cross_validate(dataset, task, layout=full_layout, **common))
    removed = {}
    for name in inputs:
        removed[name] = _means(cross_validate(dataset, task, layout=full_layout.without(name), **common))
    return AblationReport(task, full, removed)


# ---------------------------------------------------------------------------
# contribution
# ---------------------------------------------------------------------------


@dataclass
class ContributionReport:
    task: str
    names: tuple
    ratios: np.ndarray  # aggregate over folds, sums to 1
    per_fold: np.ndarray  # folds x inputs, each row sums to 1

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["task", "fold", *self.names])
            w.writerow([self.task, "all", *(_fmt(v) for v in self.ratios)])
            for f, row in enumerate(self.per_fold):
                w.writerow([self.task, f, *(_fmt(v) for v in row)])

    def to_dict(self):
        return {"task": self.task, "names": list(self.names), "ratios": self.ratios.tolist(),
                "per_fold": self.per_fold.tolist()}

    def write_json(self, path):
        _write_json(path, self.to_dict())


def _normalize(v):
    total = v.sum()
    if total <= 0:
        warnings.warn("all docking outputs are zero; reporting uniform contributions", RuntimeWarning, stacklevel=3)
        return np.full(len(v), 1.0 / len(v))
    return v / total


def docked_mass(model, xs) -> np.ndarray:
    """``p'_k * ||dock_k(x_k)||_1`` for each input of one record (0 where unavailable)."""
    avail = np.array([x is not None for x in xs])
    p = renormalize_p(model.p, avail, model.on_missing)
    out = np.zeros(model.m)
    for k, x in enumerate(xs):
        if x is not None:
            out[k] = p[k] * np.abs(dock(x, k, model)).sum()
    return out


def contribution(cv: CVResult) -> ContributionReport:
    """Share of the embracement signal carried by each input, from trained fold models.

    For every validation record the selection-weighted L1 norm of each docked
    input is computed; these are averaged over records and folds and scaled to
    sum to one.
    """
    names = cv.fold_results[0].model.names
    sums = np.zeros((len(cv.fold_results), len(names)))
    counts = np.zeros(len(cv.fold_results))
    for f, fr in enumerate(cv.fold_results):
        for xs in fr.val_inputs:
            if any(x is not None for x in xs):
                sums[f] += docked_mass(fr.model, xs)
                counts[f] += 1
    per_fold = np.array([_normalize(s / max(c, 1)) for s, c in zip(sums, counts)])
    ratios = _normalize(sums.sum(axis=0) / max(counts.sum(), 1))
    return ContributionReport(cv.task, tuple(names), ratios, per_fold)
