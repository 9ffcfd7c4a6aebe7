"""EmbraceNet-style fusion network with hand-derived gradients.

Each input k is mapped by a docking layer ``d_k = relu(W_k x_k + b_k)`` into a
``c``-dimensional space. The embracement layer picks, for every coordinate
``i``, one modality drawn from ``p`` (renormalized over the available inputs)
and copies ``d_k[i]``. At inference the draw is replaced by its expectation
``sum_k p_k d_k``. A single affine layer maps the fused vector to two logits.

All parameters live in one flat float64 vector; ``W``, ``b``, ``head_W`` and
``head_b`` are views into it, and gradients use the same layout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

EMBRACE_SIZE = 32


def _glorot(rng, fan_in, fan_out):
    a = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_out, fan_in))


@dataclass
class FusionModel:
    dims: tuple
    names: tuple
    c: int = EMBRACE_SIZE
    p: np.ndarray = None
    on_missing: str = "uniform"  # what renormalize_p does when p has no mass on available inputs
    params: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.names = tuple(self.names)
        if len(self.names) != len(self.dims):
            raise ValueError("names and dims differ in length")
        m = len(self.dims)
        self.p = np.full(m, 1.0 / m) if self.p is None else np.asarray(self.p, dtype=np.float64)
        check_simplex(self.p)
        if self.on_missing not in ("uniform", "error"):
            raise ValueError("on_missing must be 'uniform' or 'error'")
        size = self.c * (sum(self.dims) + m) + 2 * self.c + 2
        if self.params is None:
            self.params = np.zeros(size)
        else:
            self.params = np.asarray(self.params, dtype=np.float64)
            if self.params.shape != (size,):
                raise ValueError(f"expected {size} parameters, got {self.params.shape}")
        self._bind()

    def _bind(self):
        layout = []
        off = 0
        for d in self.dims:
            layout.append((off, (self.c, d)))
            off += self.c * d
            layout.append((off, (self.c,)))
            off += self.c
        layout.append((off, (2, self.c)))
        layout.append((off + 2 * self.c, (2,)))
        self._layout = layout
        self.W, self.b, self.head_W, self.head_b = self.views(self.params)

    @property
    def m(self):
        return len(self.dims)

    def views(self, flat):
        """Split a flat vector with this model's layout into (W list, b list, head_W, head_b)."""
        parts = [flat[off : off + math.prod(shape)].reshape(shape) for off, shape in self._layout]
        return parts[0:-2:2], parts[1:-2:2], parts[-2], parts[-1]

    @classmethod
    def initialize(cls, dims, names, rng, c=EMBRACE_SIZE, p=None, on_missing="uniform"):
        model = cls(dims, names, c, p, on_missing)
        for k, d in enumerate(model.dims):
            model.W[k][...] = _glorot(rng, d, c)
        model.head_W[...] = _glorot(rng, c, 2)
        return model

    def copy(self):
        return FusionModel(self.dims, self.names, self.c, self.p.copy(), self.on_missing, self.params.copy())

    def index(self, name):
        return self.names.index(name)

    # --- checkpoint -------------------------------------------------------

    def to_dict(self):
        arrays = []
        for k, name in enumerate(self.names):
            arrays.append({"name": f"dock.{name}.weight", "shape": list(self.W[k].shape), "data": self.W[k].ravel().tolist()})
            arrays.append({"name": f"dock.{name}.bias", "shape": [self.c], "data": self.b[k].tolist()})
        arrays.append({"name": "head.weight", "shape": [2, self.c], "data": self.head_W.ravel().tolist()})
        arrays.append({"name": "head.bias", "shape": [2], "data": self.head_b.tolist()})
        return {
            "config": {"names": list(self.names), "dims": list(self.dims), "c": self.c,
                       "p": self.p.tolist(), "on_missing": self.on_missing},
            "parameters": arrays,
        }

    @classmethod
    def from_dict(cls, d):
        cfg = d["config"]
        model = cls(cfg["dims"], cfg["names"], cfg["c"], cfg["p"], cfg.get("on_missing", "uniform"))
        expected = model.to_dict()["parameters"]
        got = d["parameters"]
        if [a["name"] for a in got] != [a["name"] for a in expected]:
            raise ValueError("checkpoint parameter list does not match its config")
        chunks = []
        for a, e in zip(got, expected):
            if list(a["shape"]) != e["shape"] or len(a["data"]) != math.prod(e["shape"]):
                raise ValueError(f"bad shape for {a['name']}")
            chunks.append(np.asarray(a["data"], dtype=np.float64))
        model.params[...] = np.concatenate(chunks)
        return model


def save_model(model: FusionModel, path) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh)


def load_model(path) -> FusionModel:
    with open(path, encoding="utf-8") as fh:
        return FusionModel.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# layers
# ---------------------------------------------------------------------------


def check_simplex(p, tol=1e-9):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or not np.all(np.isfinite(p)) or abs(p.sum() - 1.0) > tol:
        raise ValueError(f"p must be a probability vector, got {p}")
    return p


def dock(x, k: int, model: FusionModel) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dims[k],):
        raise ValueError(f"input for {model.names[k]} has shape {x.shape}, expected ({model.dims[k]},)")
    return np.maximum(model.W[k] @ x + model.b[k], 0.0)


def sample_mask(p, c: int, rng) -> np.ndarray:
    """``c`` independent categorical draws from ``p``; entry ``i`` is the modality chosen for coordinate ``i``."""
    cdf = selection_cdf(p)
    idx = np.searchsorted(cdf, rng.random(c), side="right")
    return np.minimum(idx, len(cdf) - 1)


def selection_cdf(p) -> np.ndarray:
    """Cumulative ``p``, pinned to exactly 1 from the last nonzero entry on.

    Pinning keeps rounding in the cumulative sum from ever selecting a
    trailing zero-probability modality.
    """
    p = check_simplex(p)
    cdf = np.cumsum(p)
    cdf[np.flatnonzero(p > 0)[-1]:] = 1.0
    return cdf


def mask_onehot(mask, m: int) -> np.ndarray:
    """(m, c) 0/1 matrix: column ``i`` has a single 1 in row ``mask[i]``."""
    r = np.zeros((m, len(mask)))
    r[mask, np.arange(len(mask))] = 1.0
    return r


def embrace(docked, mask) -> np.ndarray:
    docked = np.asarray(docked, dtype=np.float64)
    return docked[np.asarray(mask), np.arange(docked.shape[1])]


def embrace_expected(docked, p) -> np.ndarray:
    return np.asarray(p, dtype=np.float64) @ np.asarray(docked, dtype=np.float64)


def renormalize_p(p, availability, on_missing: str = "uniform") -> np.ndarray:
    """Zero the unavailable entries of ``p`` and rescale the rest to sum to 1.

    If no probability mass is left on the available inputs, either fall back
    to uniform over them (``on_missing="uniform"``) or raise.
    """
    p = np.asarray(p, dtype=np.float64)
    avail = np.asarray(availability, dtype=bool)
    if not avail.any():
        raise ValueError("no modality is available")
    q = np.where(avail, p, 0.0)
    total = q.sum()
    if total <= 0:
        if on_missing == "error":
            raise ValueError("all selection probability sits on unavailable modalities")
        return avail / avail.sum()
    return q / total


def softmax2(logits):
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


@dataclass
class Cache:
    xs: list
    avail: np.ndarray
    z: np.ndarray  # (m, c) pre-activations, zero rows for unavailable inputs
    sel: np.ndarray  # (m, c) per-coordinate mixing weights (one-hot columns when sampled)
    e: np.ndarray
    probs: np.ndarray


def forward(xs, model: FusionModel, availability=None, mode: str = "infer", rng=None, mask=None):
    """Class probabilities for one record.

    ``xs`` holds one vector per input (``None`` where unavailable). In
    ``"train"`` mode a mask is drawn from ``rng`` unless ``mask`` is given; in
    ``"infer"`` mode the expectation over masks is used.
    """
    m, c = model.m, model.c
    if availability is None:
        availability = [x is not None for x in xs]
    avail = np.asarray(availability, dtype=bool)
    if len(xs) != m or avail.shape != (m,):
        raise ValueError(f"expected {m} inputs")
    p = renormalize_p(model.p, avail, model.on_missing)
    z = np.zeros((m, c))
    for k in range(m):
        if avail[k]:
            x = np.asarray(xs[k], dtype=np.float64)
            if x.shape != (model.dims[k],):
                raise ValueError(f"input for {model.names[k]} has shape {x.shape}, expected ({model.dims[k]},)")
            z[k] = model.W[k] @ x + model.b[k]
    d = np.maximum(z, 0.0)
    if mode == "train":
        if mask is None:
            if rng is None:
                raise ValueError("train mode needs an rng or a mask")
            mask = sample_mask(p, c, rng)
        mask = np.asarray(mask)
        if np.any(~avail[mask]):
            raise ValueError("mask selects an unavailable modality")
        sel = mask_onehot(mask, m)
    elif mode == "infer":
        sel = np.repeat(p[:, None], c, axis=1)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    e = (sel * d).sum(axis=0)
    probs = softmax2(model.head_W @ e + model.head_b)
    return probs, Cache(list(xs), avail, z, sel, e, probs)


def backward(cache: Cache, grad_logits, model: FusionModel) -> np.ndarray:
    """Gradient of the loss w.r.t. every parameter, flat and in ``model.params`` layout.

    The mask is treated as a constant. ReLU has subgradient 0 at 0.
    """
    g = np.asarray(grad_logits, dtype=np.float64)
    grad = np.zeros_like(model.params)
    gW, gb, ghW, ghb = model.views(grad)
    ghW[...] = np.outer(g, cache.e)
    ghb[...] = g
    de = model.head_W.T @ g
    dz = cache.sel * de * (cache.z > 0)
    for k in range(model.m):
        if cache.avail[k]:
            gW[k][...] = np.outer(dz[k], cache.xs[k])
            gb[k][...] = dz[k]
    return grad
