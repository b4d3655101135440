# cython: language_level=3
"""Compiled replicate kernels.

Every function here has a numpy twin in ``_pykernels`` with identical
results; threshold arithmetic is written in the same operation order so
both round identically.
"""
import numpy as np

cimport cython
cimport numpy as cnp
from libc.stdlib cimport calloc, free

cnp.import_array()


cdef inline bint _below(double x, double t, bint strict) noexcept nogil:
    if strict:
        return x < t
    return x <= t


@cython.boundscheck(False)
@cython.wraparound(False)
def step_up_counts(const double[:, ::1] values, const double[::1] q, long shift, long m_total, bint strict):
    """Step-up rejection counts, one per row, without sorting.

    Only values clearing the largest threshold can be rejected, so a
    branchless pass first compacts those. Each survivor is then dropped
    into the first threshold bucket it clears, and the count is the largest
    i whose cumulative bucket count reaches i. Thresholds are tabulated once
    per row as ``q * (i + shift) / m``; the bucket guess only needs to be
    close, since exact comparisons against the table settle it.
    """
    cdef Py_ssize_t rows = values.shape[0]
    cdef Py_ssize_t n = values.shape[1]
    cdef Py_ssize_t row, k, kept
    cdef long i, best, cum
    cdef double x, qr, y, scale, last
    cdef double m = <double>m_total
    cdef double top = <double>n
    cdef long *counts
    cdef double *thr
    cdef double *kept_values
    out = np.zeros(rows, dtype=np.int64)
    cdef cnp.int64_t[::1] res = out
    if n == 0:
        return out
    counts = <long *> calloc(n + 2, sizeof(long))
    thr = <double *> calloc(n + 2, sizeof(double))
    kept_values = <double *> calloc(n, sizeof(double))
    if counts == NULL or thr == NULL or kept_values == NULL:
        free(counts)
        free(thr)
        free(kept_values)
        raise MemoryError()
    try:
        with nogil:
            for row in range(rows):
                qr = q[row]
                for k in range(n + 2):
                    counts[k] = 0
                for i in range(1, n + 1):
                    thr[i] = qr * <double>(i + shift) / m
                last = thr[n]
                kept = 0
                if strict:
                    for k in range(n):
                        x = values[row, k]
                        kept_values[kept] = x
                        kept += x < last
                else:
                    for k in range(n):
                        x = values[row, k]
                        kept_values[kept] = x
                        kept += x <= last
                scale = m / qr if qr > 0.0 else 0.0
                for k in range(kept):
                    x = kept_values[k]
                    # clamp before truncating; a NaN (0 * inf for subnormal q)
                    # fails the first test and becomes 0
                    y = x * scale - shift
                    y = y if y >= 0.0 else 0.0
                    y = y if y <= top else top
                    i = <long>y + 1
                    # the guess is almost always exact or one off, so one
                    # branchless step each way settles it and the loops
                    # below rarely iterate
                    i -= (i > 1) & _below(x, thr[i - 1], strict)
                    i += (i <= n) & (not _below(x, thr[i], strict))
                    while i > 1 and _below(x, thr[i - 1], strict):
                        i -= 1
                    while i <= n and not _below(x, thr[i], strict):
                        i += 1
                    counts[i] += 1
                cum = 0
                best = 0
                for i in range(1, n + 1):
                    cum += counts[i]
                    if cum >= i:
                        best = i
                res[row] = best
    finally:
        free(counts)
        free(thr)
        free(kept_values)
    return out


@cython.boundscheck(False)
@cython.wraparound(False)
def gamma_hat_sorted(const double[:, ::1] sorted_values, double x):
    cdef Py_ssize_t rows = sorted_values.shape[0]
    cdef Py_ssize_t n = sorted_values.shape[1]
    cdef Py_ssize_t row, i
    cdef double best, v, ratio
    cdef double dn = <double>n
    out = np.ones(rows, dtype=np.float64)
    cdef double[::1] res = out
    if n == 0:
        return out
    with nogil:
        for row in range(rows):
            best = 1.0
            for i in range(n):
                v = sorted_values[row, i]
                if v > x:
                    break
                ratio = (1.0 - <double>(i + 1) / dn) / (1.0 - v)
                if ratio < best:
                    best = ratio
            res[row] = best
    return out


@cython.boundscheck(False)
@cython.wraparound(False)
def count_leq(const double[:, ::1] values, const double[::1] thresholds):
    cdef Py_ssize_t rows = values.shape[0]
    cdef Py_ssize_t n = values.shape[1]
    cdef Py_ssize_t row, k
    cdef long c
    cdef double t
    out = np.zeros(rows, dtype=np.int64)
    cdef cnp.int64_t[::1] res = out
    with nogil:
        for row in range(rows):
            c = 0
            t = thresholds[row]
            for k in range(n):
                if values[row, k] <= t:
                    c += 1
            res[row] = c
    return out


@cython.boundscheck(False)
@cython.wraparound(False)
def ks_uniform_sorted(const double[:, ::1] sorted_values):
    cdef Py_ssize_t rows = sorted_values.shape[0]
    cdef Py_ssize_t n = sorted_values.shape[1]
    cdef Py_ssize_t row, i
    cdef double d, u, a, b
    cdef double dn = <double>n
    out = np.zeros(rows, dtype=np.float64)
    cdef double[::1] res = out
    with nogil:
        for row in range(rows):
            d = 0.0
            for i in range(n):
                u = sorted_values[row, i]
                a = <double>(i + 1) / dn - u
                b = u - <double>i / dn
                if a > d:
                    d = a
                if b > d:
                    d = b
            res[row] = d
    return out
