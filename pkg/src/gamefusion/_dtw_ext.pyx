# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled DTW kernels. Same API and results as ``_dtw_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, exp

cnp.import_array()


cdef void _accumulate(const double[::1] x, const double[::1] y, double[:, ::1] D) noexcept nogil:
    cdef Py_ssize_t m = x.shape[0], n = y.shape[0], i, j
    cdef double best, c, diff
    for i in range(m):
        for j in range(n):
            diff = x[i] - y[j]
            c = diff * diff
            if i == 0 and j == 0:
                D[i, j] = c
                continue
            best = INFINITY
            if i > 0 and j > 0:
                best = D[i - 1, j - 1]
            if i > 0 and D[i - 1, j] < best:
                best = D[i - 1, j]
            if j > 0 and D[i, j - 1] < best:
                best = D[i, j - 1]
            D[i, j] = c + best


cdef Py_ssize_t _backtrack(double[:, ::1] D, Py_ssize_t[:, ::1] out) noexcept nogil:
    # fills out[] from the end backwards; returns the start offset
    cdef Py_ssize_t i = D.shape[0] - 1, j = D.shape[1] - 1
    cdef Py_ssize_t k = out.shape[0] - 1
    cdef double diag, up, left
    out[k, 0] = i
    out[k, 1] = j
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diag = D[i - 1, j - 1]
            up = D[i - 1, j]
            left = D[i, j - 1]
            if diag <= up and diag <= left:
                i -= 1
                j -= 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        k -= 1
        out[k, 0] = i
        out[k, 1] = j
    return k


def _check(x, y):
    x = np.ascontiguousarray(x, dtype=np.float64).ravel()
    y = np.ascontiguousarray(y, dtype=np.float64).ravel()
    if x.shape[0] == 0 or y.shape[0] == 0:
        raise ValueError("DTW needs non-empty sequences")
    return x, y


def accumulated_cost(x, y):
    x, y = _check(x, y)
    D = np.empty((x.shape[0], y.shape[0]))
    _accumulate(x, y, D)
    return D


def dtw_distance(x, y):
    x, y = _check(x, y)
    D = np.empty((x.shape[0], y.shape[0]))
    _accumulate(x, y, D)
    return float(D[x.shape[0] - 1, y.shape[0] - 1])


def dtw_path(x, y):
    x, y = _check(x, y)
    cdef Py_ssize_t m = x.shape[0], n = y.shape[0]
    D = np.empty((m, n))
    _accumulate(x, y, D)
    out = np.empty((m + n - 1, 2), dtype=np.intp)
    cdef Py_ssize_t start = _backtrack(D, out)
    return float(D[m - 1, n - 1]), out[start:].copy()


def dtw_aligned_mean(x, y):
    """DTW distance plus, for each index of ``x``, the mean of its aligned ``y`` values."""
    x, y = _check(x, y)
    cdef Py_ssize_t m = x.shape[0], n = y.shape[0], k, start
    D = np.empty((m, n))
    _accumulate(x, y, D)
    path = np.empty((m + n - 1, 2), dtype=np.intp)
    start = _backtrack(D, path)
    cdef Py_ssize_t[:, ::1] p = path
    cdef const double[::1] yv = y
    sums = np.zeros(m)
    counts = np.zeros(m)
    cdef double[::1] s = sums, c = counts
    for k in range(start, m + n - 1):
        s[p[k, 0]] += yv[p[k, 1]]
        c[p[k, 0]] += 1.0
    return float(D[m - 1, n - 1]), sums / counts


def cross_features_flat(flat, offsets, double sign):
    """Relation-graph distances and attention blocks for one record.

    ``flat`` concatenates the n feature vectors; ``offsets`` has n + 1 entries.
    Returns ``(A, attention)`` with ``A[i, j] = dtw(f_i, f_j)`` and the
    concatenated attended vectors.
    """
    cdef const double[::1] f = np.ascontiguousarray(flat, dtype=np.float64)
    cdef Py_ssize_t[::1] off = np.ascontiguousarray(offsets, dtype=np.intp)
    cdef Py_ssize_t n = off.shape[0] - 1, total = off[n]
    cdef Py_ssize_t i, j, k, t, a, b, maxlen = 0, start
    for i in range(n):
        if off[i + 1] - off[i] < 1:
            raise ValueError("DTW needs non-empty sequences")
        if off[i + 1] - off[i] > maxlen:
            maxlen = off[i + 1] - off[i]
    A_arr = np.zeros((n, n))
    out_arr = np.empty(total)
    # aligned[j, t]: partner j's mean value aligned to benchmark index t (current benchmark only)
    al_arr = np.empty((n, maxlen))
    D_arr = np.empty(maxlen * maxlen)
    path_arr = np.empty((2 * maxlen, 2), dtype=np.intp)
    cnt_arr = np.empty(maxlen)
    w_arr = np.empty(n)
    cdef double[:, ::1] A = A_arr, al = al_arr
    cdef double[::1] out = out_arr, cnt = cnt_arr, w = w_arr
    cdef Py_ssize_t[:, ::1] path = path_arr
    cdef double[:, ::1] D
    cdef double smax, ssum
    for k in range(n):
        a = off[k + 1] - off[k]
        for j in range(n):
            if j == k:
                continue
            b = off[j + 1] - off[j]
            D = D_arr[: a * b].reshape(a, b)
            _accumulate(f[off[k]:off[k + 1]], f[off[j]:off[j + 1]], D)
            A[k, j] = D[a - 1, b - 1]
            start = _backtrack(D, path[: a + b - 1])
            for t in range(a):
                al[j, t] = 0.0
                cnt[t] = 0.0
            for t in range(start, a + b - 1):
                al[j, path[t, 0]] += f[off[j] + path[t, 1]]
                cnt[path[t, 0]] += 1.0
            for t in range(a):
                al[j, t] = al[j, t] / cnt[t]
        # softmax(sign * d) over the row, self distance 0
        smax = -INFINITY
        for j in range(n):
            if sign * A[k, j] > smax:
                smax = sign * A[k, j]
        ssum = 0.0
        for j in range(n):
            w[j] = exp(sign * A[k, j] - smax)
            ssum += w[j]
        for j in range(n):
            w[j] = w[j] / ssum
        for t in range(a):
            out[off[k] + t] = f[off[k] + t]
        for j in range(n):
            for t in range(a):
                if j == k:
                    out[off[k] + t] += w[j] * f[off[k] + t]
                else:
                    out[off[k] + t] += w[j] * al[j, t]
    return A_arr, out_arr
