# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled belief hot kernels.

Mirrors assayplan._kernels_py function by function; the dispatcher in
assayplan.kernels picks whichever imports.  Summation is sequential in
record order in both backends so the two agree to float rounding.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

cnp.import_array()

BACKEND = "cython"


def distance_accumulate(
    cnp.float64_t[::1] base,
    cnp.float64_t[:, ::1] feat_matrix,
    cnp.int64_t[::1] rows,
    cnp.float64_t[::1] coefs,
    cnp.float64_t[::1] values,
):
    cdef Py_ssize_t n = base.shape[0]
    cdef Py_ssize_t m = rows.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    cdef Py_ssize_t i, j, r
    cdef double acc, diff
    for i in range(n):
        acc = base[i]
        for j in range(m):
            r = rows[j]
            diff = values[j] - feat_matrix[r, i]
            acc += coefs[j] * diff * diff
        out[i] = acc
    return out_arr


def weights_from_distances(cnp.float64_t[::1] d, double lambda_w):
    cdef Py_ssize_t n = d.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] raw_arr = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] raw = raw_arr
    cdef Py_ssize_t i
    cdef double dmin, total, w
    dmin = d[0]
    for i in range(1, n):
        if d[i] < dmin:
            dmin = d[i]
    total = 0.0
    for i in range(n):
        w = exp(-lambda_w * (d[i] - dmin))
        raw[i] = w
        total += w
    return raw_arr, dmin, total


def target_stats(
    cnp.float64_t[::1] d,
    double lambda_w,
    cnp.int64_t[::1] g_idx,
    cnp.float64_t[::1] g_vals,
    cnp.float64_t[::1] g_in,
):
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t ng = g_idx.shape[0]
    cdef Py_ssize_t i
    cdef double dmin, mass, m1, lm, e, gbar, h, diff
    dmin = d[0]
    for i in range(1, n):
        if d[i] < dmin:
            dmin = d[i]
    mass = 0.0
    m1 = 0.0
    lm = 0.0
    for i in range(ng):
        e = exp(-lambda_w * (d[g_idx[i]] - dmin))
        mass += e
        m1 += e * g_vals[i]
        lm += e * g_in[i]
    if mass <= 0.0:
        return mass, float("nan"), float("nan"), float("nan")
    gbar = m1 / mass
    h = 0.0
    for i in range(ng):
        e = exp(-lambda_w * (d[g_idx[i]] - dmin))
        diff = g_vals[i] - gbar
        h += e * diff * diff
    return mass, gbar, h / mass, lm / mass


def sample_index(cnp.float64_t[::1] d, double lambda_w, double u):
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t i
    cdef double dmin, total, acc, target
    dmin = d[0]
    for i in range(1, n):
        if d[i] < dmin:
            dmin = d[i]
    total = 0.0
    for i in range(n):
        total += exp(-lambda_w * (d[i] - dmin))
    target = u * total
    acc = 0.0
    for i in range(n):
        acc += exp(-lambda_w * (d[i] - dmin))
        if acc > target:
            return i
    return n - 1
