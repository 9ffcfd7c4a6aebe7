"""Dynamic time warping between 1-D sequences.

The dynamic program runs in a compiled extension when it is built, and in a
pure-Python fallback otherwise. Set ``GAMEFUSION_PURE_PYTHON=1`` to force the
fallback. Both produce identical distances and paths.

Paths are 0-based ``(i, j)`` index pairs. Ties during backtracking prefer the
diagonal step, then the step that decrements ``i``, then the one that
decrements ``j``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _dtw_py

if os.environ.get("GAMEFUSION_PURE_PYTHON") == "1":
    _kernel = _dtw_py
else:
    try:
        from . import _dtw_ext as _kernel
    except ImportError:  # extension not built
        _kernel = _dtw_py

BACKEND = "cython" if _kernel is not _dtw_py else "python"
ORACLE_MAX_CELLS = 64


@dataclass(frozen=True)
class DtwResult:
    distance: float
    path: np.ndarray  # (L, 2) array of 0-based index pairs

    @property
    def pairs(self):
        return [tuple(int(v) for v in p) for p in self.path]


def _as_sequence(x, name):
    a = np.asarray(x, dtype=np.float64).ravel()
    if a.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def dtw(x, y) -> DtwResult:
    """Minimum cumulative squared-difference alignment of ``x`` and ``y``."""
    x = _as_sequence(x, "x")
    y = _as_sequence(y, "y")
    dist, path = _kernel.dtw_path(x, y)
    return DtwResult(float(dist), path)


def dtw_distance(x, y) -> float:
    return float(_kernel.dtw_distance(_as_sequence(x, "x"), _as_sequence(y, "y")))


def aligned_mean(x, y):
    """Return ``(distance, a)`` where ``a[i]`` averages the ``y`` values aligned to ``x[i]``."""
    return _kernel.dtw_aligned_mean(_as_sequence(x, "x"), _as_sequence(y, "y"))


def path_cost(x, y, path) -> float:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    return float(sum((x[i] - y[j]) ** 2 for i, j in path))


def check_path(path, m: int, n: int) -> None:
    """Raise ``ValueError`` unless ``path`` is a valid warping path on an ``m x n`` grid."""
    p = [tuple(int(v) for v in q) for q in path]
    if not p:
        raise ValueError("empty path")
    if p[0] != (0, 0):
        raise ValueError(f"path starts at {p[0]}, not (0, 0)")
    if p[-1] != (m - 1, n - 1):
        raise ValueError(f"path ends at {p[-1]}, not {(m - 1, n - 1)}")
    for (i0, j0), (i1, j1) in zip(p, p[1:]):
        di, dj = i1 - i0, j1 - j0
        if di < 0 or dj < 0:
            raise ValueError(f"non-monotone step {(i0, j0)} -> {(i1, j1)}")
        if di > 1 or dj > 1 or di + dj == 0:
            raise ValueError(f"discontinuous step {(i0, j0)} -> {(i1, j1)}")


def dtw_oracle(x, y) -> float:
    """Minimum path cost by enumerating every valid warping path. Only for ``m*n <= 64``."""
    x = [float(v) for v in _as_sequence(x, "x")]
    y = [float(v) for v in _as_sequence(y, "y")]
    m, n = len(x), len(y)
    if m * n > ORACLE_MAX_CELLS:
        raise ValueError(f"oracle limited to m*n <= {ORACLE_MAX_CELLS}, got {m * n}")
    best = float("inf")
    stack = [(0, 0, (x[0] - y[0]) ** 2)]
    while stack:
        i, j, cost = stack.pop()
        if i == m - 1 and j == n - 1:
            best = min(best, cost)
            continue
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            a, b = i + di, j + dj
            if a < m and b < n:
                stack.append((a, b, cost + (x[a] - y[b]) ** 2))
    return best


def pairwise_attended(feats, sign: float):
    """All ordered-pair DTW distances and the attention blocks for one set of features.

    Returns ``(A, blocks)``: ``A[i, j]`` is the DTW distance between features
    ``i`` and ``j``; ``blocks`` concatenates the attended vectors.
    """
    feats = [_as_sequence(f, f"feature {i}") for i, f in enumerate(feats)]
    offsets = np.concatenate([[0], np.cumsum([len(f) for f in feats])])
    return _kernel.cross_features_flat(np.concatenate(feats), offsets, float(sign))
