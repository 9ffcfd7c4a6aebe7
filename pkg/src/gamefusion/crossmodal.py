"""Cross-modal features built from the standardized single-modal vectors.

The relation graph holds pairwise DTW distances between modalities. The
attention feature re-expresses every modality (the "benchmark") as itself
plus a distance-weighted sum of the other modalities, each warped onto the
benchmark's index axis via the DTW alignment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dtw import aligned_mean, dtw_distance, pairwise_attended

# closer features get larger weight; +1 reproduces a literal softmax over distances
DEFAULT_SIGN = -1.0


@dataclass(frozen=True)
class RelationGraph:
    adjacency: np.ndarray
    nodes: tuple

    def vector(self) -> np.ndarray:
        """Strict upper triangle, row by row (the matrix is symmetric with zero diagonal)."""
        iu = np.triu_indices(len(self.nodes), k=1)
        return self.adjacency[iu]


@dataclass(frozen=True)
class AttentionFeature:
    vector: np.ndarray
    dims: tuple


def relation_graph(feats, nodes=None) -> RelationGraph:
    """Pairwise DTW distances. A ``None`` entry (unavailable modality) gets NaN row and column."""
    n = len(feats)
    A = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if feats[i] is None or feats[j] is None:
                A[i, j] = A[j, i] = np.nan
            else:
                A[i, j] = A[j, i] = dtw_distance(feats[i], feats[j])
    for i in range(n):
        if feats[i] is None:
            A[i, i] = np.nan
    return RelationGraph(A, tuple(nodes) if nodes is not None else tuple(range(n)))


def attention_weights(distances, sign: float = DEFAULT_SIGN) -> np.ndarray:
    """Softmax of ``sign * distances``."""
    s = sign * np.asarray(distances, dtype=np.float64)
    e = np.exp(s - s.max())
    return e / e.sum()


def _attend(k, feats, dists, aligned, sign, weights):
    B = np.asarray(feats[k], dtype=np.float64)
    w = attention_weights(dists, sign) if weights is None else np.asarray(weights, dtype=np.float64)
    out = B.copy()
    for j in range(len(feats)):
        out += w[j] * (B if j == k else aligned[j])
    return out


def attended_vector(benchmark_index: int, feats, sign: float = DEFAULT_SIGN, weights=None) -> np.ndarray:
    """Benchmark feature plus the weighted, DTW-aligned partner features.

    Partner values aligned to the same benchmark index are averaged. The
    benchmark's own term uses distance 0 and the identity alignment.
    ``weights`` overrides the distance-derived weights.
    """
    k = benchmark_index
    B = np.asarray(feats[k], dtype=np.float64)
    dists = np.zeros(len(feats))
    aligned = [None] * len(feats)
    for j, F in enumerate(feats):
        if j != k:
            dists[j], aligned[j] = aligned_mean(B, F)
    return _attend(k, feats, dists, aligned, sign, weights)


def attention_feature(feats, sign: float = DEFAULT_SIGN) -> AttentionFeature:
    return cross_features(feats, sign)[1]


def cross_features(feats, sign: float = DEFAULT_SIGN, nodes=None):
    """Relation graph and attention feature in one pass over the ordered pairs.

    ``feats`` must all be present; records with a missing constituent have no
    cross-modal features.
    """
    A, blocks = pairwise_attended(feats, sign)
    graph = RelationGraph(A, tuple(nodes) if nodes is not None else tuple(range(len(feats))))
    att = AttentionFeature(blocks, tuple(np.asarray(f).size for f in feats))
    return graph, att
