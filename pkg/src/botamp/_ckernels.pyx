# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()

cdef double PROB_EPS = 1e-12


cdef inline double _sigmoid(double z) nogil:
    cdef double e
    if z >= 0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


def logistic_loss_grad(const double[:, ::1] X, const double[::1] y,
                       const double[::1] w, double b, double l2):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], i, j
    cdef double z, p, pc, r, loss = 0.0, gb = 0.0, reg = 0.0
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gw_arr = np.zeros(d, dtype=np.float64)
    cdef double[::1] gw = gw_arr
    with nogil:
        for i in range(n):
            z = b
            for j in range(d):
                z = z + X[i, j] * w[j]
            p = _sigmoid(z)
            pc = p
            if pc < PROB_EPS:
                pc = PROB_EPS
            elif pc > 1.0 - PROB_EPS:
                pc = 1.0 - PROB_EPS
            loss -= y[i] * log(pc) + (1.0 - y[i]) * log(1.0 - pc)
            r = p - y[i]
            gb += r
            for j in range(d):
                gw[j] += r * X[i, j]
        for j in range(d):
            gw[j] = gw[j] / n + l2 * w[j]
            reg += w[j] * w[j]
    return loss / n + 0.5 * l2 * reg, gw_arr, gb / n


def hinge_loss_subgrad(const double[:, ::1] X, const double[::1] ys,
                       const double[::1] w, double b, double l2):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], i, j
    cdef double m, loss = 0.0, gb = 0.0, reg = 0.0
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gw_arr = np.zeros(d, dtype=np.float64)
    cdef double[::1] gw = gw_arr
    with nogil:
        for i in range(n):
            m = b
            for j in range(d):
                m = m + X[i, j] * w[j]
            m = ys[i] * m
            if m < 1.0:
                loss += 1.0 - m
                gb -= ys[i]
                for j in range(d):
                    gw[j] -= ys[i] * X[i, j]
        for j in range(d):
            gw[j] = gw[j] / n + l2 * w[j]
            reg += w[j] * w[j]
    return loss / n + 0.5 * l2 * reg, gw_arr, gb / n


def knn_vote(const double[:, ::1] X, const unsigned char[::1] y,
             const double[:, ::1] Q, Py_ssize_t k):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], m = Q.shape[0]
    cdef Py_ssize_t q, i, j, filled, pos, pos_votes
    cdef double acc, diff
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] best_d = np.empty(k, dtype=np.float64)
    cdef Py_ssize_t[::1] best_i = np.empty(k, dtype=np.intp)
    with nogil:
        for q in range(m):
            filled = 0
            for i in range(n):
                acc = 0.0
                for j in range(d):
                    diff = Q[q, j] - X[i, j]
                    acc = acc + diff * diff
                if filled == k and acc >= best_d[k - 1]:
                    continue
                # insertion keeps (distance, index) order; later equal distances rank after
                pos = filled if filled < k else k - 1
                while pos > 0 and best_d[pos - 1] > acc:
                    best_d[pos] = best_d[pos - 1]
                    best_i[pos] = best_i[pos - 1]
                    pos -= 1
                best_d[pos] = acc
                best_i[pos] = i
                if filled < k:
                    filled += 1
            pos_votes = 0
            for j in range(k):
                pos_votes += y[best_i[j]]
            out[q] = <double>pos_votes / <double>k
    return out_arr
