# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled k-nearest-window search kernels.

Both kernels return ``(starts, dists, comparisons)`` with neighbours ordered
by ascending distance, ties resolved toward the later window start. The pure
Python twin lives in ``_fallback.py`` and must stay bit-identical.
"""

import numpy as np
from libc.math cimport floor, ceil, sqrt, INFINITY


cdef inline double _window_dist(const double[::1] x, Py_ssize_t j, Py_ssize_t qs,
                                Py_ssize_t m) noexcept nogil:
    cdef double d = 0.0, diff
    cdef Py_ssize_t i
    for i in range(m):
        diff = x[j + i] - x[qs + i]
        d += diff * diff
    return d


cdef inline bint _offer(double d, Py_ssize_t j, double[::1] td, Py_ssize_t[::1] tj,
                        Py_ssize_t *cnt, Py_ssize_t k) noexcept nogil:
    """Insert (d, j) into the sorted top-k buffers; return True if it changed."""
    cdef Py_ssize_t p
    if cnt[0] == k:
        if d > td[k - 1] or (d == td[k - 1] and j < tj[k - 1]):
            return False
        p = k - 1
    else:
        p = cnt[0]
        cnt[0] += 1
    while p > 0 and (td[p - 1] > d or (td[p - 1] == d and tj[p - 1] < j)):
        td[p] = td[p - 1]
        tj[p] = tj[p - 1]
        p -= 1
    td[p] = d
    tj[p] = j
    return True


def knn_naive(const double[::1] x, Py_ssize_t m, Py_ssize_t k):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t nt = n - m
    cdef Py_ssize_t qs = n - m
    cdef Py_ssize_t j, cnt = 0
    cdef long long comparisons = 0
    if nt < 1:
        return np.empty(0, dtype=np.int64), np.empty(0), 0
    td_arr = np.empty(k)
    tj_arr = np.empty(k, dtype=np.intp)
    cdef double[::1] td = td_arr
    cdef Py_ssize_t[::1] tj = tj_arr
    with nogil:
        for j in range(nt):
            _offer(_window_dist(x, j, qs, m), j, td, tj, &cnt, k)
        comparisons = nt
    return tj_arr[:cnt].astype(np.int64), td_arr[:cnt].copy(), int(comparisons)


def knn_indexed(const double[::1] x, Py_ssize_t m, Py_ssize_t k,
                const long long[::1] keys, const long long[::1] pos,
                double scale, long long guard):
    """Pruned search over a key-sorted index.

    ``keys``/``pos`` list every indexed position sorted by (key, position).
    Entries are visited outward from the query's key; once k windows are
    held, any entry whose key falls outside the shrinking interval around
    the query's first element ends that direction of the scan.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t nt = n - m
    cdef Py_ssize_t qs = n - m
    cdef Py_ssize_t size = keys.shape[0]
    cdef Py_ssize_t cnt = 0, left, right, j, lo_i, hi_i, mid
    cdef long long comparisons = 0, key, qk
    cdef double q0, lo = -INFINITY, hi = INFINITY, r
    cdef bint take_right
    if nt < 1:
        return np.empty(0, dtype=np.int64), np.empty(0), 0
    td_arr = np.empty(k)
    tj_arr = np.empty(k, dtype=np.intp)
    cdef double[::1] td = td_arr
    cdef Py_ssize_t[::1] tj = tj_arr
    with nogil:
        q0 = x[qs]
        qk = <long long>floor(q0 * scale)
        lo_i = 0
        hi_i = size
        while lo_i < hi_i:
            mid = (lo_i + hi_i) // 2
            if keys[mid] < qk:
                lo_i = mid + 1
            else:
                hi_i = mid
        right = lo_i
        left = lo_i - 1
        while left >= 0 or right < size:
            if left < 0:
                take_right = True
            elif right >= size:
                take_right = False
            else:
                take_right = (keys[right] - qk) <= (qk - keys[left])
            if take_right:
                key = keys[right]
                if <double>key > hi:
                    right = size
                    continue
                j = pos[right]
                right += 1
            else:
                key = keys[left]
                if <double>key < lo:
                    left = -1
                    continue
                j = pos[left]
                left -= 1
            if j >= nt:
                continue
            comparisons += 1
            if _offer(_window_dist(x, j, qs, m), j, td, tj, &cnt, k) and cnt == k:
                r = sqrt(td[k - 1])
                lo = floor((q0 - r) * scale) - guard
                hi = ceil((q0 + r) * scale) + guard
    return tj_arr[:cnt].astype(np.int64), td_arr[:cnt].copy(), int(comparisons)
