# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling kernels.

Accumulation is strictly sequential (no reordering, no fast-math), so
results are bit-identical to the numpy fallback in _python.py.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()


def weighted_pick(const double[::1] weights, double u):
    """Sample an index proportionally to `weights` using uniform draw `u`."""
    cdef Py_ssize_t n = weights.shape[0]
    cdef Py_ssize_t i
    cdef double total = 0.0
    for i in range(n):
        total += weights[i]
    if not total > 0.0:
        return -1
    cdef double threshold = u * total
    cdef double acc = 0.0
    for i in range(n):
        acc += weights[i]
        if acc > threshold:
            return i
    return n - 1


def masked_weighted_pick(const double[::1] row, excluded, double u):
    """weighted_pick over a copy of `row` with `excluded` indices zeroed."""
    cdef Py_ssize_t n = row.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] buf = np.empty(n, dtype=np.float64)
    cdef double[::1] w = buf
    cdef Py_ssize_t i
    for i in range(n):
        w[i] = row[i]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] exc = np.ascontiguousarray(excluded, dtype=np.int64)
    cdef long long[::1] ev = exc
    for i in range(ev.shape[0]):
        w[ev[i]] = 0.0
    return weighted_pick(w, u)
