# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the sweeps in ``_pykernels``; same signatures."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fmax

cnp.import_array()


cdef inline Py_ssize_t _count(Py_ssize_t b, Py_ssize_t levels):
    # nodes in the first ``levels`` levels of a full b-ary tree
    cdef Py_ssize_t total = 0, width = 1, t
    for t in range(levels):
        total += width
        width *= b
    return total


def snell_sweep(const double[:, ::1] probs, const double[::1] dv, const double[::1] xi,
                const double[::1] lower, int b, int depth):
    cdef Py_ssize_t n_int = _count(b, depth)
    cdef Py_ssize_t n_nodes = _count(b, depth + 1)
    # one buffer: separate page-aligned outputs collide in cache on deep trees
    buf = np.empty(n_nodes + 2 * n_int)
    cdef double[::1] y = buf[:n_nodes]
    cdef double[::1] yt = buf[n_nodes:n_nodes + n_int]
    cdef double[::1] dk = buf[n_nodes + n_int:]
    cdef Py_ssize_t v, k, c0
    cdef double acc, yv
    for v in range(n_nodes - n_int):
        y[n_int + v] = xi[v]
    for v in range(n_int - 1, -1, -1):
        c0 = b * v + 1
        acc = 0.0
        for k in range(b):
            acc += probs[v, k] * y[c0 + k]
        acc += dv[v]
        # branch-free: the obstacle test is unpredictable on random data
        yv = fmax(acc, lower[v])
        yt[v] = acc
        y[v] = yv
        dk[v] = yv - acc
    return buf[:n_nodes], buf[n_nodes:n_nodes + n_int], buf[n_nodes + n_int:]


def backward_accumulate(const double[:, ::1] probs, const double[::1] inc, int b, int depth):
    cdef Py_ssize_t n_int = _count(b, depth)
    cdef Py_ssize_t n_nodes = _count(b, depth + 1)
    out_arr = np.zeros(n_nodes)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t v, k, c0
    cdef double acc
    for v in range(n_int - 1, -1, -1):
        c0 = b * v + 1
        acc = 0.0
        for k in range(b):
            acc += probs[v, k] * out[c0 + k]
        out[v] = inc[v] + acc
    return out_arr


def path_max(const double[::1] inc, int b, int depth):
    cdef Py_ssize_t n_int = _count(b, depth)
    cdef Py_ssize_t n_nodes = _count(b, depth + 1)
    out_arr = np.zeros(n_nodes)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t v, k, c0
    cdef double best
    for v in range(n_int - 1, -1, -1):
        c0 = b * v + 1
        best = out[c0]
        for k in range(1, b):
            if out[c0 + k] > best:
                best = out[c0 + k]
        out[v] = inc[v] + best
    return out_arr
