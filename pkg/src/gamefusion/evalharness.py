"""Stratified k-fold cross-validation and the binary metric suite."""

from __future__ import annotations

import csv
import json
import logging
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .crossmodal import DEFAULT_SIGN
from .dataset import Dataset, check_task
from .embrace import FusionModel
from .pipeline import FoldInputs, FusionLayout, RawFeatures, build_fold_inputs
from .trainer import MajorityBaseline, TrainConfig, TrainHistory, predict_proba, train

log = logging.getLogger(__name__)

METRICS = ("accuracy", "precision", "recall", "f1")
CM_ORDERS = ("normalize-average", "average-normalize")


@dataclass(frozen=True)
class FoldAssignment:
    folds: tuple  # k sorted arrays of record indices

    @property
    def k(self):
        return len(self.folds)

    def train_rows(self, f):
        return np.sort(np.concatenate([fold for g, fold in enumerate(self.folds) if g != f]))

    def ids(self, dataset: Dataset):
        return [[dataset.records[i].id for i in fold] for fold in self.folds]


def stratified_folds(labels, k: int = 10, seed: int = 0) -> FoldAssignment:
    """Shuffle each class, then deal its members round-robin across ``k`` folds.

    Negatives continue dealing where the positives stopped, so fold sizes
    differ by at most one. If a class has fewer than ``k`` members this
    degrades, with a warning, to a plain shuffled k-fold split.
    """
    y = np.asarray(labels, dtype=np.int64)
    n = len(y)
    if n < k:
        raise ValueError(f"cannot make {k} folds from {n} records")
    rng = np.random.default_rng(seed)
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    buckets = [[] for _ in range(k)]
    if min(len(pos), len(neg)) < k:
        warnings.warn(f"a class has fewer than {k} members; using plain k-fold", RuntimeWarning, stacklevel=2)
        for j, i in enumerate(rng.permutation(n)):
            buckets[j % k].append(i)
    else:
        start = 0
        for members in (rng.permutation(pos), rng.permutation(neg)):
            for j, i in enumerate(members):
                buckets[(start + j) % k].append(i)
            start = (start + len(members)) % k
    return FoldAssignment(tuple(np.array(sorted(b), dtype=np.int64) for b in buckets))


def confusion_matrix(y_true, y_pred) -> np.ndarray:
    """2x2 counts, rows = true class, columns = predicted class."""
    cm = np.zeros((2, 2), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
    return cm


def metrics(cm) -> dict:
    """Accuracy and support-weighted precision, recall and F1 of a 2x2 confusion matrix.

    Per-class 0/0 ratios count as 0. Weighted F1 is the harmonic mean of the
    weighted precision and weighted recall.
    """
    cm = np.asarray(cm, dtype=np.float64)
    total = cm.sum()
    if total < 1:
        raise ValueError("empty confusion matrix")
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    diag = np.diag(cm)
    w = support / total
    prec = np.divide(diag, predicted, out=np.zeros(2), where=predicted > 0)
    rec = np.divide(diag, support, out=np.zeros(2), where=support > 0)
    wp = float(w @ prec)
    wr = float(w @ rec)
    f1 = 2.0 * wp * wr / (wp + wr) if wp + wr > 0 else 0.0
    return {"accuracy": float(diag.sum() / total), "precision": wp, "recall": wr, "f1": f1}


def normalize_rows(cm) -> np.ndarray:
    cm = np.asarray(cm, dtype=np.float64)
    s = cm.sum(axis=1, keepdims=True)
    return np.divide(cm, s, out=np.zeros_like(cm), where=s > 0)


def normalized_confusion(cms, order: str = "normalize-average") -> np.ndarray:
    if order == "normalize-average":
        return np.mean([normalize_rows(c) for c in cms], axis=0)
    if order == "average-normalize":
        return normalize_rows(np.mean(cms, axis=0))
    raise ValueError(f"cm order must be one of {CM_ORDERS}")


@dataclass
class MetricsReport:
    task: str
    folds: list  # per fold: metrics dict plus "confusion"
    confusion: np.ndarray  # normalized, aggregated over folds
    cm_order: str = "normalize-average"

    def aggregate(self):
        out = {}
        for name in METRICS:
            vals = [f[name] for f in self.folds]
            out[name] = {"mean": float(np.mean(vals)), "max": float(max(vals)), "min": float(min(vals))}
        return out

    def to_dict(self):
        return {
            "task": self.task,
            "aggregate": self.aggregate(),
            "folds": [{**{k: f[k] for k in METRICS}, "confusion": np.asarray(f["confusion"]).tolist()}
                      for f in self.folds],
            "normalized_confusion": self.confusion.tolist(),
            "cm_order": self.cm_order,
        }

    def write_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    def write_csv(self, path):
        agg = self.aggregate()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["task", "metric", "mean", "max", "min"])
            for name in METRICS:
                a = agg[name]
                w.writerow([self.task, name, repr(float(a["mean"])), repr(float(a["max"])), repr(float(a["min"]))])


@dataclass
class FoldResult:
    index: int
    val_rows: np.ndarray
    probs: np.ndarray
    preds: np.ndarray
    model: FusionModel
    history: TrainHistory
    fit_rows: dict
    val_inputs: list = field(repr=False, default=None)


@dataclass
class CVResult:
    task: str
    report: MetricsReport
    folds: FoldAssignment
    fold_results: list
    seed: int

    @property
    def predictions(self) -> np.ndarray:
        """Held-out prediction for every record, indexed like the dataset."""
        n = sum(len(f) for f in self.folds.folds)
        out = np.empty(n, dtype=np.int64)
        for fr in self.fold_results:
            out[fr.val_rows] = fr.preds
        return out


def fold_seed(master: int, fold: int) -> int:
    return int(master) ^ int(fold)


def _run_fold(raw, labels, assignment, f, layout, cfg, seed, sign):
    train_rows = assignment.train_rows(f)
    val_rows = assignment.folds[f]
    fi: FoldInputs = build_fold_inputs(raw, train_rows, layout, sign)
    usable = [i for i in train_rows if any(x is not None for x in fi.inputs[i])]
    rng = np.random.default_rng(fold_seed(seed, f))
    model = FusionModel.initialize(layout.dims(raw), fi.names, rng, c=cfg.embrace_size)
    model, history = train(model, [fi.inputs[i] for i in usable], labels[usable], cfg, rng)
    fallback = int(np.count_nonzero(labels[train_rows] == 1) > np.count_nonzero(labels[train_rows] == 0))
    val_inputs = [fi.inputs[i] for i in val_rows]
    probs = np.empty((len(val_rows), 2))
    for j, xs in enumerate(val_inputs):
        if any(x is not None for x in xs):
            probs[j] = predict_proba(model, [xs])[0]
        else:
            probs[j] = np.eye(2)[fallback]
    preds = (probs[:, 1] > 0.5).astype(np.int64)
    return FoldResult(f, val_rows, probs, preds, model, history, fi.fit_rows, val_inputs)


def _run_fold_star(args):
    return _run_fold(*args)


def cross_validate(dataset: Dataset, task: str, cfg: TrainConfig = None, k: int = 10, seed: int = None,
                   layout: FusionLayout = None, sign: float = DEFAULT_SIGN, cm_order: str = "normalize-average",
                   workers: int = 1, raw: RawFeatures = None, assignment: FoldAssignment = None) -> CVResult:
    """Stratified k-fold CV of the fusion model on one task.

    ``seed`` (default ``cfg.seed``) drives the fold split; fold ``f`` trains
    with seed ``seed ^ f``. Results do not depend on ``workers``.
    """
    check_task(task)
    cfg = (cfg or TrainConfig()).validate()
    seed = cfg.seed if seed is None else seed
    if cm_order not in CM_ORDERS:
        raise ValueError(f"cm order must be one of {CM_ORDERS}")
    layout = layout or FusionLayout()
    raw = raw or RawFeatures.from_dataset(dataset)
    labels = dataset.labels(task)
    assignment = assignment or stratified_folds(labels, k, seed)
    jobs = [(raw, labels, assignment, f, layout, cfg, seed, sign) for f in range(assignment.k)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_fold_star, jobs))
    else:
        results = [_run_fold(*j) for j in jobs]

    per_fold = []
    for fr in results:
        cm = confusion_matrix(labels[fr.val_rows], fr.preds)
        per_fold.append({**metrics(cm), "confusion": cm})
    ncm = normalized_confusion([f["confusion"] for f in per_fold], cm_order)
    report = MetricsReport(task, per_fold, ncm, cm_order)
    return CVResult(task, report, assignment, results, seed)


def majority_accuracy(labels, assignment: FoldAssignment) -> float:
    """Mean per-fold accuracy of the training-majority predictor on the same folds."""
    labels = np.asarray(labels, dtype=np.int64)
    accs = []
    for f, val in enumerate(assignment.folds):
        pred = MajorityBaseline(labels[assignment.train_rows(f)]).predict(len(val))
        accs.append(metrics(confusion_matrix(labels[val], pred))["accuracy"])
    return float(np.mean(accs))


def write_predictions(cv: CVResult, dataset: Dataset, path) -> None:
    labels = dataset.labels(cv.task)
    rows = sorted((int(i), fr.index, int(fr.preds[j]), float(fr.probs[j, 1]))
                  for fr in cv.fold_results for j, i in enumerate(fr.val_rows))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "fold", "label", "pred", "p_positive"])
        for i, f, pred, p1 in rows:
            w.writerow([dataset.records[i].id, f, int(labels[i]), pred, repr(p1)])
