# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled mini-batch SGD kernels (hot-loop backend).

Same contract as _kernels_py: advance model arrays in place through the
precomputed visit order, return the first step with a non-finite batch loss
or -1. Loops run without the GIL so client fan-out threads parallelize.
"""

from libc.math cimport exp, log, tanh, isfinite

import numpy as np

BACKEND_NAME = "compiled"


def sgd_linear(double[::1] w, double[::1] b,
               const double[:, ::1] x, const double[::1] y, double lr,
               const long long[::1] order, const long long[::1] starts,
               const long long[::1] ends):
    cdef Py_ssize_t d = w.shape[0]
    cdef Py_ssize_t num_steps = starts.shape[0]
    cdef Py_ssize_t s, i, j, row, n
    cdef double pred, r, loss, k
    cdef double[::1] gw = np.zeros(d)
    cdef double gb
    cdef Py_ssize_t bad = -1
    with nogil:
        for s in range(num_steps):
            n = ends[s] - starts[s]
            loss = 0.0
            gb = 0.0
            for j in range(d):
                gw[j] = 0.0
            for i in range(starts[s], ends[s]):
                row = order[i]
                pred = b[0]
                for j in range(d):
                    pred += x[row, j] * w[j]
                r = pred - y[row]
                loss += r * r
                gb += r
                for j in range(d):
                    gw[j] += r * x[row, j]
            loss /= n
            if not isfinite(loss):
                bad = s
                break
            k = 2.0 * lr / n
            for j in range(d):
                w[j] -= k * gw[j]
            b[0] -= k * gb
    return bad


def sgd_softmax(double[:, ::1] w, double[::1] b,
                const double[:, ::1] x, const long long[::1] y, double lr,
                const long long[::1] order, const long long[::1] starts,
                const long long[::1] ends):
    cdef Py_ssize_t d = w.shape[0]
    cdef Py_ssize_t c = w.shape[1]
    cdef Py_ssize_t num_steps = starts.shape[0]
    cdef Py_ssize_t s, i, j, k, row, n, label
    cdef double m, z, loss, coef, logit_label
    cdef double[::1] logits = np.zeros(c)
    cdef double[:, ::1] gw = np.zeros((d, c))
    cdef double[::1] gb = np.zeros(c)
    cdef Py_ssize_t bad = -1
    with nogil:
        for s in range(num_steps):
            n = ends[s] - starts[s]
            loss = 0.0
            for j in range(d):
                for k in range(c):
                    gw[j, k] = 0.0
            for k in range(c):
                gb[k] = 0.0
            for i in range(starts[s], ends[s]):
                row = order[i]
                label = y[row]
                for k in range(c):
                    logits[k] = b[k]
                    for j in range(d):
                        logits[k] += x[row, j] * w[j, k]
                logit_label = logits[label]
                m = logits[0]
                for k in range(1, c):
                    if logits[k] > m:
                        m = logits[k]
                z = 0.0
                for k in range(c):
                    logits[k] = exp(logits[k] - m)
                    z += logits[k]
                loss += log(z) + m - logit_label
                for k in range(c):
                    coef = logits[k] / z
                    if k == label:
                        coef -= 1.0
                    gb[k] += coef
                    for j in range(d):
                        gw[j, k] += coef * x[row, j]
            loss /= n
            if not isfinite(loss):
                bad = s
                break
            coef = lr / n
            for j in range(d):
                for k in range(c):
                    w[j, k] -= coef * gw[j, k]
            for k in range(c):
                b[k] -= coef * gb[k]
    return bad


def sgd_mlp(double[:, ::1] w1, double[::1] b1, double[:, ::1] w2, double[::1] b2,
            const double[:, ::1] x, const double[::1] y, double lr,
            const long long[::1] order, const long long[::1] starts,
            const long long[::1] ends, bint classification):
    cdef Py_ssize_t d = w1.shape[0]
    cdef Py_ssize_t h = w1.shape[1]
    cdef Py_ssize_t c = w2.shape[1]
    cdef Py_ssize_t num_steps = starts.shape[0]
    cdef Py_ssize_t s, i, j, k, q, row, n, label
    cdef double m, z, loss, coef, r
    cdef double[::1] hid = np.zeros(h)
    cdef double[::1] logits = np.zeros(c)
    cdef double[::1] glog = np.zeros(c)
    cdef double[::1] ghid = np.zeros(h)
    cdef double[:, ::1] gw1 = np.zeros((d, h))
    cdef double[::1] gb1 = np.zeros(h)
    cdef double[:, ::1] gw2 = np.zeros((h, c))
    cdef double[::1] gb2 = np.zeros(c)
    cdef Py_ssize_t bad = -1
    with nogil:
        for s in range(num_steps):
            n = ends[s] - starts[s]
            loss = 0.0
            for j in range(d):
                for q in range(h):
                    gw1[j, q] = 0.0
            for q in range(h):
                gb1[q] = 0.0
                for k in range(c):
                    gw2[q, k] = 0.0
            for k in range(c):
                gb2[k] = 0.0
            for i in range(starts[s], ends[s]):
                row = order[i]
                for q in range(h):
                    m = b1[q]
                    for j in range(d):
                        m += x[row, j] * w1[j, q]
                    hid[q] = tanh(m)
                for k in range(c):
                    logits[k] = b2[k]
                    for q in range(h):
                        logits[k] += hid[q] * w2[q, k]
                if classification:
                    label = <Py_ssize_t> y[row]
                    r = logits[label]
                    m = logits[0]
                    for k in range(1, c):
                        if logits[k] > m:
                            m = logits[k]
                    z = 0.0
                    for k in range(c):
                        logits[k] = exp(logits[k] - m)
                        z += logits[k]
                    loss += log(z) + m - r
                    for k in range(c):
                        glog[k] = logits[k] / z
                        if k == label:
                            glog[k] -= 1.0
                else:
                    r = logits[0] - y[row]
                    loss += r * r
                    glog[0] = 2.0 * r
                for q in range(h):
                    m = 0.0
                    for k in range(c):
                        m += glog[k] * w2[q, k]
                    ghid[q] = m * (1.0 - hid[q] * hid[q])
                for q in range(h):
                    gb1[q] += ghid[q]
                    for k in range(c):
                        gw2[q, k] += hid[q] * glog[k]
                for k in range(c):
                    gb2[k] += glog[k]
                for j in range(d):
                    for q in range(h):
                        gw1[j, q] += x[row, j] * ghid[q]
            loss /= n
            if not isfinite(loss):
                bad = s
                break
            coef = lr / n
            for j in range(d):
                for q in range(h):
                    w1[j, q] -= coef * gw1[j, q]
            for q in range(h):
                b1[q] -= coef * gb1[q]
                for k in range(c):
                    w2[q, k] -= coef * gw2[q, k]
            for k in range(c):
                b2[k] -= coef * gb2[k]
    return bad
