"""Pure-Python/numpy versions of the kernels in ``_kernels.pyx``.

Distances are accumulated coordinate by coordinate in the same order as the
compiled code, so both backends select identical neighbour sets.
"""

import math

import numpy as np


def _window_dists(x, m):
    nt = x.shape[0] - m
    q = x[nt:]
    d = np.zeros(nt)
    for i in range(m):
        diff = x[i:i + nt] - q[i]
        d += diff * diff
    return d


def knn_naive(x, m, k):
    x = np.asarray(x, dtype=np.float64)
    nt = x.shape[0] - m
    if nt < 1:
        return np.empty(0, dtype=np.int64), np.empty(0), 0
    d = _window_dists(x, m)
    if nt <= k:
        cand = np.arange(nt)
    else:
        kth = np.partition(d, k - 1)[k - 1]
        cand = np.flatnonzero(d <= kth)
    order = cand[np.lexsort((-cand, d[cand]))][:k]
    return order.astype(np.int64), d[order], int(nt)


def knn_indexed(x, m, k, keys, pos, scale, guard):
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    nt = n - m
    if nt < 1:
        return np.empty(0, dtype=np.int64), np.empty(0), 0
    xs = x.tolist()
    q = xs[nt:]
    q0 = q[0]
    qk = math.floor(q0 * scale)
    size = len(keys)
    right = int(np.searchsorted(keys, qk, side="left"))
    left = right - 1
    lo, hi = -math.inf, math.inf
    top = []  # sorted list of (d, -j)
    comparisons = 0
    while left >= 0 or right < size:
        if left < 0:
            take_right = True
        elif right >= size:
            take_right = False
        else:
            take_right = (keys[right] - qk) <= (qk - keys[left])
        if take_right:
            key = int(keys[right])
            if key > hi:
                right = size
                continue
            j = int(pos[right])
            right += 1
        else:
            key = int(keys[left])
            if key < lo:
                left = -1
                continue
            j = int(pos[left])
            left -= 1
        if j >= nt:
            continue
        comparisons += 1
        d = 0.0
        for i in range(m):
            diff = xs[j + i] - q[i]
            d += diff * diff
        item = (d, -j)
        if len(top) == k:
            if item >= top[-1]:
                continue
            top.pop()
        p = len(top)
        while p > 0 and top[p - 1] > item:
            p -= 1
        top.insert(p, item)
        if len(top) == k:
            r = math.sqrt(top[-1][0])
            lo = math.floor((q0 - r) * scale) - guard
            hi = math.ceil((q0 + r) * scale) + guard
    starts = np.array([-t[1] for t in top], dtype=np.int64)
    dists = np.array([t[0] for t in top], dtype=np.float64)
    return starts, dists, comparisons
