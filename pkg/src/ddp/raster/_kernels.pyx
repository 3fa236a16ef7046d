# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the numpy kernels in _kernels_py.py.

Both backends must stay bit-identical: convolve_rows accumulates float64
products in ascending tap order (build with -ffp-contract=off so the C
compiler cannot fuse the multiply-add), and area_reduce_rows is pure int64
arithmetic.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def convolve_rows(double[:, ::1] src, double[::1] weights, int radius):
    """1-D convolution along axis 1 with clamp-to-edge handling."""
    cdef Py_ssize_t h = src.shape[0]
    cdef Py_ssize_t w = src.shape[1]
    cdef Py_ssize_t taps = 2 * radius + 1
    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t y, x, k, xx
    cdef double acc
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for k in range(taps):
                xx = x + k - radius
                if xx < 0:
                    xx = 0
                elif xx >= w:
                    xx = w - 1
                acc += weights[k] * src[y, xx]
            out[y, x] = acc
    return out_arr


def area_reduce_rows(cnp.int64_t[:, ::1] src, int out_size):
    """Exact box-average numerators along axis 1 (footprint [i*S/O, (i+1)*S/O))."""
    cdef Py_ssize_t h = src.shape[0]
    cdef Py_ssize_t s = src.shape[1]
    cdef Py_ssize_t o = out_size
    out_arr = np.empty((h, o), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    cdef Py_ssize_t y, i, j, j0, j1
    cdef cnp.int64_t lo, hi, left, right, cov, acc
    for y in range(h):
        for i in range(o):
            lo = i * s        # footprint in O-scaled coordinates
            hi = (i + 1) * s
            j0 = lo // o
            j1 = (hi + o - 1) // o
            if j1 > s:
                j1 = s
            acc = 0
            for j in range(j0, j1):
                left = j * o
                if left < lo:
                    left = lo
                right = (j + 1) * o
                if right > hi:
                    right = hi
                cov = right - left
                acc += cov * src[y, j]
            out[y, i] = acc
    return out_arr
