# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for the dense kernels.

Contracts mirror ``vood._kernels._numpy`` exactly; which module backs
``vood._kernels`` is decided once at import time. Accumulation order is
fixed (ascending reduction index), so results are bit-reproducible run to
run within this backend.
"""

import numpy as np

from libc.math cimport exp as c_exp, log as c_log


def matmul_nn(a_in, b_in):
    """a @ b for row-major float64 matrices."""
    cdef const double[:, ::1] a = np.ascontiguousarray(a_in, dtype=np.float64)
    cdef const double[:, ::1] b = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef Py_ssize_t m = a.shape[0], k = a.shape[1], n = b.shape[1]
    out = np.zeros((m, n), dtype=np.float64)
    cdef double[:, ::1] c = out
    cdef Py_ssize_t i, j, p
    cdef double aip
    for i in range(m):
        for p in range(k):
            aip = a[i, p]
            for j in range(n):
                c[i, j] += aip * b[p, j]
    return out


def matmul_nt(a_in, b_in):
    """a @ b.T; b given as (n, k) so both operands stay row-contiguous."""
    cdef const double[:, ::1] a = np.ascontiguousarray(a_in, dtype=np.float64)
    cdef const double[:, ::1] b = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef Py_ssize_t m = a.shape[0], k = a.shape[1], n = b.shape[0]
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] c = out
    cdef Py_ssize_t i, j, p
    cdef double acc
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for p in range(k):
                acc += a[i, p] * b[j, p]
            c[i, j] = acc
    return out


def matmul_tn(a_in, b_in):
    """a.T @ b; a given as (k, m), b as (k, n)."""
    cdef const double[:, ::1] a = np.ascontiguousarray(a_in, dtype=np.float64)
    cdef const double[:, ::1] b = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef Py_ssize_t k = a.shape[0], m = a.shape[1], n = b.shape[1]
    out = np.zeros((m, n), dtype=np.float64)
    cdef double[:, ::1] c = out
    cdef Py_ssize_t i, j, p
    cdef double api
    for p in range(k):
        for i in range(m):
            api = a[p, i]
            for j in range(n):
                c[i, j] += api * b[p, j]
    return out


def log_softmax_rows(x_in, double temperature):
    """Row-wise max-subtracted log-softmax of x / temperature."""
    cdef const double[:, ::1] x = np.ascontiguousarray(x_in, dtype=np.float64)
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j
    cdef double zmax, acc, z
    for i in range(m):
        zmax = x[i, 0] / temperature
        for j in range(1, n):
            z = x[i, j] / temperature
            if z > zmax:
                zmax = z
        acc = 0.0
        for j in range(n):
            z = x[i, j] / temperature - zmax
            o[i, j] = z
            acc += c_exp(z)
        acc = c_log(acc)
        for j in range(n):
            o[i, j] -= acc
    return out
