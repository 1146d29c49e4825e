# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for empirical characteristic function sums.

Both functions return the raw sums ``sum_k cos(t x_k)`` and
``-sum_k sin(t x_k)`` (the real and imaginary parts of
``sum_k exp(-i t x_k)``); normalisation happens in Python.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()

# Anchoring period of the rotation recurrence. Every ANCHOR nodes the phase is
# recomputed exactly, which keeps the accumulated drift at ~ANCHOR ulps.
cdef enum:
    ANCHOR = 32


def ecf_sums_uniform(const double[::1] x, double dt, Py_ssize_t n_nodes):
    """Sums at the nodes ``t_j = j * dt`` for ``j = 0 .. n_nodes - 1``."""
    cdef Py_ssize_t m = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] re_out = np.zeros(n_nodes)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] im_out = np.zeros(n_nodes)
    cdef double[::1] re = re_out
    cdef double[::1] im = im_out
    cdef Py_ssize_t k, j, j0, j1
    cdef double xk, cr, ci, sr, si, tmp
    with nogil:
        for k in range(m):
            xk = x[k]
            # step rotation exp(-i dt x)
            sr = cos(dt * xk)
            si = -sin(dt * xk)
            j0 = 0
            while j0 < n_nodes:
                j1 = j0 + ANCHOR
                if j1 > n_nodes:
                    j1 = n_nodes
                cr = cos(j0 * dt * xk)
                ci = -sin(j0 * dt * xk)
                for j in range(j0, j1):
                    re[j] += cr
                    im[j] += ci
                    tmp = cr * sr - ci * si
                    ci = cr * si + ci * sr
                    cr = tmp
                j0 = j1
    return re_out, im_out


def ecf_sums_points(const double[::1] x, const double[::1] t):
    """Sums at arbitrary frequencies ``t`` by direct evaluation."""
    cdef Py_ssize_t m = x.shape[0]
    cdef Py_ssize_t n = t.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] re_out = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] im_out = np.zeros(n)
    cdef double[::1] re = re_out
    cdef double[::1] im = im_out
    cdef Py_ssize_t k, j
    cdef double ph, acc_r, acc_i
    with nogil:
        for j in range(n):
            acc_r = 0.0
            acc_i = 0.0
            for k in range(m):
                ph = t[j] * x[k]
                acc_r += cos(ph)
                acc_i -= sin(ph)
            re[j] = acc_r
            im[j] = acc_i
    return re_out, im_out
