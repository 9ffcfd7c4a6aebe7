"""Pure-Python DTW kernels, used when the compiled extension is unavailable."""

import math

import numpy as np


def _check(x, y):
    x = [float(v) for v in np.asarray(x, dtype=np.float64).ravel()]
    y = [float(v) for v in np.asarray(y, dtype=np.float64).ravel()]
    if not x or not y:
        raise ValueError("DTW needs non-empty sequences")
    return x, y


def _accumulate(x, y):
    n = len(y)
    D = []
    prev = None
    for i, xi in enumerate(x):
        row = [0.0] * n
        for j, yj in enumerate(y):
            c = (xi - yj) * (xi - yj)
            if i == 0 and j == 0:
                row[j] = c
                continue
            best = math.inf
            if i > 0 and j > 0:
                best = prev[j - 1]
            if i > 0 and prev[j] < best:
                best = prev[j]
            if j > 0 and row[j - 1] < best:
                best = row[j - 1]
            row[j] = c + best
        D.append(row)
        prev = row
    return D


def _backtrack(D):
    i, j = len(D) - 1, len(D[0]) - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag, up, left = D[i - 1][j - 1], D[i - 1][j], D[i][j - 1]
            if diag <= up and diag <= left:
                i, j = i - 1, j - 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        path.append((i, j))
    path.reverse()
    return path


def accumulated_cost(x, y):
    return np.array(_accumulate(*_check(x, y)))


def dtw_distance(x, y):
    D = _accumulate(*_check(x, y))
    return D[-1][-1]


def dtw_path(x, y):
    D = _accumulate(*_check(x, y))
    return D[-1][-1], np.array(_backtrack(D), dtype=np.intp)


def dtw_aligned_mean(x, y):
    x, y = _check(x, y)
    D = _accumulate(x, y)
    sums = [0.0] * len(x)
    counts = [0] * len(x)
    for i, j in _backtrack(D):
        sums[i] += y[j]
        counts[i] += 1
    return D[-1][-1], np.array([s / c for s, c in zip(sums, counts)])


def cross_features_flat(flat, offsets, sign):
    flat = [float(v) for v in np.asarray(flat, dtype=np.float64)]
    offsets = [int(o) for o in offsets]
    n = len(offsets) - 1
    feats = [flat[offsets[i]:offsets[i + 1]] for i in range(n)]
    if any(not f for f in feats):
        raise ValueError("DTW needs non-empty sequences")
    A = [[0.0] * n for _ in range(n)]
    out = []
    for k in range(n):
        B = feats[k]
        aligned = [None] * n
        for j in range(n):
            if j == k:
                continue
            D = _accumulate(B, feats[j])
            A[k][j] = D[-1][-1]
            sums = [0.0] * len(B)
            counts = [0.0] * len(B)
            for i, jj in _backtrack(D):
                sums[i] += feats[j][jj]
                counts[i] += 1.0
            aligned[j] = [s / c for s, c in zip(sums, counts)]
        s = [sign * d for d in A[k]]
        smax = max(s)
        e = [math.exp(v - smax) for v in s]
        total = 0.0
        for v in e:
            total += v
        w = [v / total for v in e]
        block = list(B)
        for j in range(n):
            src = B if j == k else aligned[j]
            for t in range(len(B)):
                block[t] += w[j] * src[t]
        out.extend(block)
    return np.array(A), np.array(out)
