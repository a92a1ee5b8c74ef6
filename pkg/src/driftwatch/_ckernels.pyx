# cython: language_level=3
"""Compiled kernels for score binning and divergence summation.

Must stay arithmetically identical to ``_pykernels``: same operation order,
same libm calls, no fast-math.
"""
from libc.math cimport log2, INFINITY


def bin_counts(const double[::1] scores, double low, double high, long long[::1] counts):
    """Add each score's bin to ``counts``; return -1, or the index of the first bad score.

    Counts are only touched when every score is inside ``[low, high]``.
    """
    cdef Py_ssize_t n = scores.shape[0]
    cdef Py_ssize_t bins = counts.shape[0]
    cdef Py_ssize_t i, idx
    cdef double span = high - low
    cdef double s
    for i in range(n):
        s = scores[i]
        if not (s >= low and s <= high):
            return i
    for i in range(n):
        idx = <Py_ssize_t>((scores[i] - low) / span * bins)
        if idx >= bins:
            idx = bins - 1
        counts[idx] += 1
    return -1


def kl_bits(const double[::1] p, const double[::1] q):
    cdef Py_ssize_t i
    cdef double total = 0.0
    for i in range(p.shape[0]):
        if p[i] > 0.0:
            if q[i] <= 0.0:
                return INFINITY
            total += p[i] * log2(p[i] / q[i])
    return total


def js_bits(const double[::1] p, const double[::1] q):
    cdef Py_ssize_t i
    cdef double m
    cdef double left = 0.0
    cdef double right = 0.0
    for i in range(p.shape[0]):
        m = 0.5 * (p[i] + q[i])
        if p[i] > 0.0:
            left += p[i] * log2(p[i] / m)
        if q[i] > 0.0:
            right += q[i] * log2(q[i] / m)
    return 0.5 * left + 0.5 * right


def js_rows(const double[:, ::1] p, const double[:, ::1] q, double[::1] out):
    """Row-wise JS divergence of two stacks of distributions, written into ``out``."""
    cdef Py_ssize_t r, i
    cdef double m, left, right
    for r in range(p.shape[0]):
        left = 0.0
        right = 0.0
        for i in range(p.shape[1]):
            m = 0.5 * (p[r, i] + q[r, i])
            if p[r, i] > 0.0:
                left += p[r, i] * log2(p[r, i] / m)
            if q[r, i] > 0.0:
                right += q[r, i] * log2(q[r, i] / m)
        out[r] = 0.5 * left + 0.5 * right
