"""Turn a dataset into per-fold fusion inputs.

For each CV fold, single-modal vectors are z-scored with statistics fitted on
the training records only; cross-modal features are then built from the
standardized vectors and themselves z-scored on the training records.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .crossmodal import DEFAULT_SIGN, cross_features
from .dataset import CROSS_MODALITIES, SINGLE_MODALITIES, Dataset
from .features import ZScoreStats, modality_vector, zscore_apply, zscore_fit


@dataclass(frozen=True)
class FusionLayout:
    """Which inputs feed the fusion network."""

    singles: tuple = SINGLE_MODALITIES
    graph: bool = True
    attention: bool = True

    @property
    def has_cross(self):
        return (self.graph or self.attention) and len(self.singles) >= 2

    @property
    def names(self):
        names = list(self.singles)
        if self.has_cross:
            if self.graph:
                names.append("relation_graph")
            if self.attention:
                names.append("attention")
        return tuple(names)

    def without(self, name: str) -> "FusionLayout":
        if name == "relation_graph":
            return replace(self, graph=False)
        if name == "attention":
            return replace(self, attention=False)
        if name not in self.singles:
            raise ValueError(f"{name} is not part of this layout")
        return replace(self, singles=tuple(m for m in self.singles if m != name))

    def dims(self, raw: "RawFeatures"):
        d = [raw.dims[m] for m in self.singles]
        if self.has_cross:
            n = len(self.singles)
            if self.graph:
                d.append(n * (n - 1) // 2)
            if self.attention:
                d.append(sum(raw.dims[m] for m in self.singles))
        return tuple(d)


@dataclass
class RawFeatures:
    """Per-modality fixed-length vectors before standardization (``None`` where unavailable)."""

    vectors: dict
    dims: dict
    n: int

    @classmethod
    def from_dataset(cls, dataset: Dataset):
        vectors, dims = {}, {}
        for m in SINGLE_MODALITIES:
            col = []
            for r in dataset.records:
                col.append(modality_vector(r.features[m], m) if r.available(m) else None)
            present = {len(v) for v in col if v is not None}
            if len(present) > 1:
                raise ValueError(f"{m}: records disagree on feature dimension {sorted(present)}")
            vectors[m] = col
            dims[m] = present.pop() if present else 0
        return cls(vectors, dims, len(dataset))


@dataclass
class FoldInputs:
    inputs: list  # per record: list of vectors / None, in layout.names order
    names: tuple
    stats: dict = field(default_factory=dict)
    fit_rows: dict = field(default_factory=dict)  # input name -> record indices used to fit its z-score


def _standardize(col, rows):
    stats = zscore_fit([col[i] for i in rows])
    out = [None] * len(col)
    idx = [i for i, v in enumerate(col) if v is not None]
    if idx:
        Z = zscore_apply(np.array([col[i] for i in idx]), stats)
        for i, z in zip(idx, Z):
            out[i] = z
    return out, stats


def build_fold_inputs(raw: RawFeatures, train_rows, layout: FusionLayout = FusionLayout(),
                      sign: float = DEFAULT_SIGN) -> FoldInputs:
    train_rows = sorted(int(i) for i in train_rows)
    cols, stats, fit_rows = {}, {}, {}
    for m in layout.singles:
        rows = [i for i in train_rows if raw.vectors[m][i] is not None]
        if not rows:
            raise ValueError(f"no training record has {m}")
        cols[m], stats[m] = _standardize(raw.vectors[m], rows)
        fit_rows[m] = rows

    if layout.has_cross:
        graph_col = [None] * raw.n
        att_col = [None] * raw.n
        for i in range(raw.n):
            feats = [cols[m][i] for m in layout.singles]
            if any(f is None for f in feats):
                continue
            g, a = cross_features(feats, sign, nodes=layout.singles)
            graph_col[i] = g.vector()
            att_col[i] = a.vector
        for name, col, on in (("relation_graph", graph_col, layout.graph), ("attention", att_col, layout.attention)):
            if not on:
                continue
            rows = [i for i in train_rows if col[i] is not None]
            if rows:
                cols[name], stats[name] = _standardize(col, rows)
            else:
                cols[name], stats[name] = [None] * raw.n, ZScoreStats(np.zeros(0), np.zeros(0))
            fit_rows[name] = rows

    names = layout.names
    inputs = [[cols[nm][i] for nm in names] for i in range(raw.n)]
    return FoldInputs(inputs, names, stats, fit_rows)
