"""Loss, optimizers, the per-record training loop and two reference baselines."""

from __future__ import annotations

import hashlib
import logging
import math
import os
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .embrace import FusionModel, backward, forward, renormalize_p, selection_cdf

if os.environ.get("GAMEFUSION_PURE_PYTHON") == "1":
    _fusion_ext = None
else:
    try:
        from . import _fusion_ext
    except ImportError:  # extension not built
        _fusion_ext = None

log = logging.getLogger(__name__)

LOG_FLOOR = 1e-12


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 30
    lr: float = 1e-3
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    class_weighting: str = "none"
    shuffle: bool = True
    seed: int = 0
    embrace_size: int = 32

    def validate(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.lr > 0:
            raise ValueError("lr must be > 0")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.class_weighting not in ("none", "inverse"):
            raise ValueError(f"unknown class weighting {self.class_weighting!r}")
        if self.embrace_size < 1:
            raise ValueError("embrace_size must be >= 1")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown train config keys: {', '.join(sorted(unknown))}")
        return cls(**d).validate()


@dataclass
class TrainHistory:
    losses: list = field(default_factory=list)
    params_hash: str = ""

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,loss\n")
            for i, v in enumerate(self.losses, start=1):
                fh.write(f"{i},{float(v)!r}\n")


def cross_entropy(probs, label: int, class_weight: float = 1.0):
    """Weighted negative log-likelihood and its gradient w.r.t. the logits."""
    probs = np.asarray(probs, dtype=np.float64)
    loss = -class_weight * math.log(max(probs[label], LOG_FLOOR))
    grad = probs.copy()
    grad[label] -= 1.0
    return loss, class_weight * grad


def class_weights(labels, scheme: str = "inverse") -> np.ndarray:
    """Per-class loss weights; inverse frequency is normalized so the mean per-record weight is 1."""
    labels = np.asarray(labels)
    if scheme == "none":
        return np.ones(2)
    counts = np.bincount(labels, minlength=2).astype(float)
    w = np.where(counts > 0, len(labels) / (2.0 * np.maximum(counts, 1.0)), 0.0)
    return w


class SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grad):
        params -= self.lr * grad


class Adam:
    def __init__(self, size, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params, grad):
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        params -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(cfg: TrainConfig, size: int):
    if cfg.optimizer == "sgd":
        return SGD(cfg.lr)
    return Adam(size, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)


def params_hash(params) -> str:
    return hashlib.sha256(np.ascontiguousarray(params).tobytes()).hexdigest()


def _check_classes(labels):
    if len(set(int(v) for v in labels)) < 2:
        warnings.warn("training split holds a single class", RuntimeWarning, stacklevel=3)


def train(model: FusionModel, inputs, labels, cfg: TrainConfig, rng=None):
    """Fit ``model`` in place, one record per update.

    ``inputs`` is a list of per-record input lists (``None`` for unavailable
    inputs). Each epoch draws a shuffle from ``rng`` and then, per record, the
    ``c`` uniforms for its embracement mask. Returns ``(model, history)``.
    """
    cfg.validate()
    labels = np.asarray(labels, dtype=np.int64)
    if len(inputs) == 0:
        raise ValueError("empty training split")
    _check_classes(labels)
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    run = _train_reference if _fusion_ext is None else _train_compiled
    history = run(model, inputs, labels, cfg, rng)
    history.params_hash = params_hash(model.params)
    return model, history


def _epoch_done(history, total, n, epoch):
    mean = float(total) / n
    if not math.isfinite(mean):
        raise TrainingDiverged(f"non-finite loss at epoch {epoch + 1}")
    history.losses.append(mean)
    log.debug("epoch %d loss %.6f", epoch + 1, mean)


def _train_reference(model, inputs, labels, cfg, rng):
    cw = class_weights(labels, cfg.class_weighting)
    opt = make_optimizer(cfg, model.params.size)
    avail = [[x is not None for x in xs] for xs in inputs]
    history = TrainHistory()
    n = len(inputs)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        total = 0.0
        for r in order:
            probs, cache = forward(inputs[r], model, avail[r], mode="train", rng=rng)
            loss, g = cross_entropy(probs, labels[r], cw[labels[r]])
            opt.step(model.params, backward(cache, g, model))
            total += loss
        _epoch_done(history, total, n, epoch)
    return history


def _train_compiled(model, inputs, labels, cfg, rng):
    n, m, c = len(inputs), model.m, model.c
    x_off = np.concatenate([[0], np.cumsum(model.dims)]).astype(np.intp)
    X = np.zeros((n, x_off[-1]))
    cdf = np.empty((n, m))
    for r, xs in enumerate(inputs):
        avail = np.array([x is not None for x in xs])
        for k, x in enumerate(xs):
            if x is not None:
                X[r, x_off[k] : x_off[k + 1]] = x
        cdf[r] = selection_cdf(renormalize_p(model.p, avail, model.on_missing))
    w_off = np.array([off for off, shape in model._layout[0:-2:2]], dtype=np.intp)
    b_off = np.array([off for off, shape in model._layout[1:-2:2]], dtype=np.intp)
    head_off = model._layout[-2][0]
    cw = class_weights(labels, cfg.class_weighting)
    adam_m = np.zeros(model.params.size)
    adam_v = np.zeros(model.params.size)
    t = 0
    dims = np.array(model.dims, dtype=np.intp)
    y = labels.astype(np.intp)
    history = TrainHistory()
    for epoch in range(cfg.epochs):
        order = (rng.permutation(n) if cfg.shuffle else np.arange(n)).astype(np.intp)
        U = rng.random((n, c))
        total, t = _fusion_ext.train_epoch(
            model.params, adam_m, adam_v, t, w_off, b_off, head_off, dims, c,
            X, x_off[:-1].copy(), cdf, y, cw, order, U,
            cfg.optimizer == "adam", cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
        _epoch_done(history, total, n, epoch)
    return history


def predict_proba(model: FusionModel, inputs) -> np.ndarray:
    return np.array([forward(xs, model, mode="infer")[0] for xs in inputs])


def predict(model: FusionModel, inputs) -> np.ndarray:
    return (predict_proba(model, inputs)[:, 1] > 0.5).astype(np.int64)


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------


class MajorityBaseline:
    def __init__(self, labels):
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size == 0:
            raise ValueError("empty split")
        # ties go to the negative class
        self.label = int(np.count_nonzero(labels == 1) > np.count_nonzero(labels == 0))

    def predict(self, n_or_inputs):
        n = n_or_inputs if isinstance(n_or_inputs, int) else len(n_or_inputs)
        return np.full(n, self.label, dtype=np.int64)


def majority_baseline(labels) -> MajorityBaseline:
    return MajorityBaseline(labels)


class LinearProbe:
    """Two-class softmax regression on one input vector."""

    def __init__(self, dim: int):
        self.dim = dim
        self.params = np.zeros(2 * dim + 2)
        self.W = self.params[: 2 * dim].reshape(2, dim)
        self.b = self.params[2 * dim :]

    def proba(self, x):
        z = self.W @ x + self.b
        z = z - z.max()
        e = np.exp(z)
        return e / e.sum()

    def fit(self, X, labels, cfg: TrainConfig, rng=None):
        cfg.validate()
        X = np.asarray(X, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        _check_classes(labels)
        rng = np.random.default_rng(cfg.seed) if rng is None else rng
        cw = class_weights(labels, cfg.class_weighting)
        opt = make_optimizer(cfg, self.params.size)
        grad = np.zeros_like(self.params)
        gW = grad[: 2 * self.dim].reshape(2, self.dim)
        history = TrainHistory()
        for epoch in range(cfg.epochs):
            order = rng.permutation(len(X)) if cfg.shuffle else np.arange(len(X))
            total = 0.0
            for r in order:
                loss, g = cross_entropy(self.proba(X[r]), labels[r], cw[labels[r]])
                gW[...] = np.outer(g, X[r])
                grad[2 * self.dim :] = g
                opt.step(self.params, grad)
                total += loss
            mean = float(total) / len(X)
            if not math.isfinite(mean):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch + 1}")
            history.losses.append(mean)
        history.params_hash = params_hash(self.params)
        return history

    def predict(self, X):
        return np.array([int(self.proba(x)[1] > 0.5) for x in np.asarray(X, dtype=np.float64)], dtype=np.int64)


def linear_probe(X, labels, cfg: TrainConfig, rng=None) -> LinearProbe:
    """Fit a probe on one modality's standardized vectors ``X`` (n x D)."""
    X = np.asarray(X, dtype=np.float64)
    probe = LinearProbe(X.shape[1])
    probe.fit(X, labels, cfg, rng)
    return probe
