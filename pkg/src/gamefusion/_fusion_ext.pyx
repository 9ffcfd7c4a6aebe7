# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled training epoch for the fusion network.

Mirrors ``trainer._train_reference`` step for step: same mask draws, same
loss, same Adam/SGD update. Only the docking dot products may round
differently from numpy's BLAS path.
"""

import numpy as np
from libc.math cimport exp, log, sqrt, pow
from libc.string cimport memset


def train_epoch(double[::1] params, double[::1] adam_m, double[::1] adam_v, long t,
                const Py_ssize_t[::1] w_off, const Py_ssize_t[::1] b_off, Py_ssize_t head_off,
                const Py_ssize_t[::1] dims, Py_ssize_t c,
                const double[:, ::1] X, const Py_ssize_t[::1] x_off,
                const double[:, ::1] cdf, const Py_ssize_t[::1] labels, const double[::1] cw,
                const Py_ssize_t[::1] order, const double[:, ::1] U,
                bint adam, double lr, double b1, double b2, double eps):
    """Run one pass over ``order``; returns ``(summed loss, adam step count)``."""
    cdef Py_ssize_t P = params.shape[0], m = dims.shape[0], n = order.shape[0]
    cdef Py_ssize_t s, r, i, j, k, y, D, wo
    grad_arr = np.zeros(P)
    e_arr = np.empty(c)
    z_arr = np.empty(c)
    sel_arr = np.empty(c, dtype=np.intp)
    cdef double[::1] grad = grad_arr, e = e_arr, z = z_arr
    cdef Py_ssize_t[::1] sel = sel_arr
    cdef double acc, l0, l1, mx, p0, p1, py, g0, g1, de, loss, total = 0.0
    cdef double bc1, bc2, mh, vh, u
    cdef Py_ssize_t hw = head_off, hb = head_off + 2 * c

    with nogil:
        for s in range(n):
            r = order[s]
            y = labels[r]
            # mask draw: first modality whose cdf exceeds u
            for i in range(c):
                u = U[s, i]
                k = 0
                while k < m - 1 and cdf[r, k] <= u:
                    k += 1
                sel[i] = k
            # forward through the selected docking rows only
            for i in range(c):
                k = sel[i]
                D = dims[k]
                wo = w_off[k] + i * D
                acc = 0.0
                for j in range(D):
                    acc = acc + params[wo + j] * X[r, x_off[k] + j]
                acc = acc + params[b_off[k] + i]
                z[i] = acc
                e[i] = acc if acc > 0.0 else 0.0
            l0 = params[hb]
            l1 = params[hb + 1]
            for i in range(c):
                l0 = l0 + params[hw + i] * e[i]
                l1 = l1 + params[hw + c + i] * e[i]
            mx = l0 if l0 > l1 else l1
            p0 = exp(l0 - mx)
            p1 = exp(l1 - mx)
            acc = p0 + p1
            p0 = p0 / acc
            p1 = p1 / acc
            py = p1 if y == 1 else p0
            if py < 1e-12:
                py = 1e-12
            loss = -cw[y] * log(py)
            total += loss
            g0 = cw[y] * (p0 - (1.0 if y == 0 else 0.0))
            g1 = cw[y] * (p1 - (1.0 if y == 1 else 0.0))
            # backward
            memset(&grad[0], 0, P * sizeof(double))
            for i in range(c):
                grad[hw + i] = g0 * e[i]
                grad[hw + c + i] = g1 * e[i]
            grad[hb] = g0
            grad[hb + 1] = g1
            for i in range(c):
                if z[i] > 0.0:
                    de = params[hw + i] * g0 + params[hw + c + i] * g1
                    k = sel[i]
                    D = dims[k]
                    wo = w_off[k] + i * D
                    for j in range(D):
                        grad[wo + j] = de * X[r, x_off[k] + j]
                    grad[b_off[k] + i] = de
            # parameter update
            if adam:
                t += 1
                bc1 = 1.0 - pow(b1, <double>t)
                bc2 = 1.0 - pow(b2, <double>t)
                for j in range(P):
                    adam_m[j] = adam_m[j] * b1 + (1.0 - b1) * grad[j]
                    adam_v[j] = adam_v[j] * b2 + (1.0 - b2) * grad[j] * grad[j]
                    mh = adam_m[j] / bc1
                    vh = adam_v[j] / bc2
                    params[j] -= lr * mh / (sqrt(vh) + eps)
            else:
                for j in range(P):
                    params[j] -= lr * grad[j]
    return total, t
