"""Nearest-neighbour regression over sliding windows of an SNR series.

Training pairs are every length-``m`` window of the history together with
the value that followed it; the query is the latest ``m`` values. The
prediction is an inverse-distance-weighted blend of the successors of the
``k`` closest windows, using squared Euclidean distance.

Two search paths share the weighting code: :func:`nnr_predict` scans every
window, :func:`nnr_predict_indexed` walks a :class:`QuantizedIndex` and
skips windows whose first element cannot be close enough.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .. import _backend
from ..errors import DimensionError, DomainError, IndexCorruptionError, PredictionError
from .compression import compress, should_compress
from .series import SnrSeries, as_values

#: Initial value of the running k-th minimum distance (65535 is the customary
#: "big number"). The kernels treat an unfilled neighbour set as unbounded.
SENTINEL_MIN = 65535.0
DEFAULT_SCALE = 1000


@dataclass(frozen=True)
class NnrConfig:
    window_m: int = 3
    k: int = 3
    idw_exponent_q: int = -2
    zero_distance_epsilon: float = 1e-12

    def __post_init__(self):
        if self.window_m < 1:
            raise DomainError("window_m must be >= 1")
        if self.k < 1:
            raise DomainError("k must be >= 1")
        if self.idw_exponent_q > -1:
            raise DomainError("idw_exponent_q must be a negative integer")
        if not self.zero_distance_epsilon > 0:
            raise DomainError("zero_distance_epsilon must be positive")


class Neighbours(NamedTuple):
    """Selected training windows, nearest first."""

    starts: np.ndarray
    distances: np.ndarray
    labels: np.ndarray
    comparisons: int


def window_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"window lengths differ: {a.shape} vs {b.shape}")
    d = 0.0
    for u, v in zip(a.tolist(), b.tolist()):
        d += (u - v) * (u - v)
    return d


def idw_weights(distances, q: int = -2) -> np.ndarray:
    """Normalised inverse-distance weights ``d**q / sum(d**q)``; all distances must be > 0."""
    d = np.asarray(distances, dtype=np.float64)
    if np.any(d <= 0):
        raise DomainError("inverse-distance weights need strictly positive distances")
    w = d ** float(q)
    return w / w.sum()


def _mean_exact(values) -> float:
    # Returns the value itself when all entries are equal.
    base = values[0]
    return base + sum(v - base for v in values) / len(values)


def combine(distances, labels, cfg: NnrConfig) -> float:
    dist = [float(d) for d in distances]
    lab = [float(v) for v in labels]
    exact = [v for d, v in zip(dist, lab) if d <= cfg.zero_distance_epsilon]
    if exact:
        return _mean_exact(exact)
    q = float(cfg.idw_exponent_q)
    num = 0.0
    den = 0.0
    for d, v in zip(dist, lab):
        w = d ** q
        num += w * v
        den += w
    return num / den


def _check_length(x, cfg):
    if x.shape[0] < cfg.window_m + 1:
        raise PredictionError(
            f"need at least {cfg.window_m + 1} samples for window_m={cfg.window_m}, got {x.shape[0]}")


def nearest_windows(series, cfg: NnrConfig = NnrConfig(), kernels=None) -> Neighbours:
    """Exhaustive k-nearest-window search (every training window is compared)."""
    x = as_values(series)
    _check_length(x, cfg)
    kern = kernels or _backend.kernels
    starts, dists, comps = kern.knn_naive(x, cfg.window_m, cfg.k)
    return Neighbours(starts, dists, x[starts + cfg.window_m], comps)


def nnr_predict(series, cfg: NnrConfig = NnrConfig()) -> float:
    nb = nearest_windows(series, cfg)
    return combine(nb.distances, nb.labels, cfg)


def prune_interval(query_first_element: float, current_min: float, scale: float = DEFAULT_SCALE,
                   guard: int = 1) -> tuple[float, float]:
    """Closed key range that can still hold a window closer than ``current_min``.

    Any window whose first element differs from the query's by more than
    ``sqrt(current_min)`` is already farther than ``current_min``. Endpoints
    are scaled into key units, floored/ceiled and widened by ``guard`` keys
    to absorb quantisation. An infinite minimum gives an unbounded range.
    """
    if current_min < 0 or math.isnan(current_min):
        raise DomainError(f"current_min must be non-negative, got {current_min}")
    r = math.sqrt(current_min)
    x = query_first_element
    if math.isinf(r):
        return -math.inf, math.inf
    return math.floor((x - r) * scale) - guard, math.ceil((x + r) * scale) + guard


class QuantizedIndex:
    """Hash of quantised SNR keys to the positions holding them.

    Stored as two parallel arrays sorted by (key, position), so each bucket
    is a contiguous run and the search kernels can walk outward from any
    key. Positions must be inserted in order 0, 1, 2, ...
    """

    def __init__(self, scale: int = DEFAULT_SCALE):
        if scale <= 0:
            raise DomainError("scale must be positive")
        self.scale = scale
        self._keys = np.empty(64, dtype=np.int64)
        self._pos = np.empty(64, dtype=np.int64)
        self._size = 0

    @classmethod
    def from_values(cls, values, scale: int = DEFAULT_SCALE) -> "QuantizedIndex":
        x = as_values(values)
        idx = cls(scale)
        keys = np.floor(x * scale).astype(np.int64)
        order = np.lexsort((np.arange(x.size), keys))
        idx._keys = keys[order]
        idx._pos = order.astype(np.int64)
        idx._size = int(x.size)
        return idx

    def key_of(self, snr_db: float) -> int:
        return math.floor(snr_db * self.scale)

    def insert(self, snr_db: float, position: int) -> "QuantizedIndex":
        if position != self._size:
            if 0 <= position < self._size:
                raise IndexCorruptionError(f"position {position} is already indexed")
            raise IndexCorruptionError(f"expected position {self._size}, got {position}")
        key = self.key_of(snr_db)
        n = self._size
        if n == self._keys.size:
            grow = max(64, n)
            self._keys = np.concatenate((self._keys, np.empty(grow, dtype=np.int64)))
            self._pos = np.concatenate((self._pos, np.empty(grow, dtype=np.int64)))
        i = int(np.searchsorted(self._keys[:n], key, side="right"))
        self._keys[i + 1:n + 1] = self._keys[i:n].copy()
        self._pos[i + 1:n + 1] = self._pos[i:n].copy()
        self._keys[i] = key
        self._pos[i] = position
        self._size = n + 1
        return self

    def __len__(self) -> int:
        return self._size

    @property
    def sorted_keys(self) -> np.ndarray:
        return self._keys[:self._size]

    @property
    def sorted_positions(self) -> np.ndarray:
        return self._pos[:self._size]

    def bucket(self, key: int) -> list[int]:
        keys = self.sorted_keys
        lo = np.searchsorted(keys, key, side="left")
        hi = np.searchsorted(keys, key, side="right")
        return self._pos[lo:hi].tolist()

    def buckets(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for key, p in zip(self.sorted_keys.tolist(), self.sorted_positions.tolist()):
            out.setdefault(key, []).append(p)
        return out

    def key_range(self) -> Optional[tuple[int, int]]:
        if not self._size:
            return None
        return int(self._keys[0]), int(self._keys[self._size - 1])

    def verify(self, series) -> None:
        """Full consistency check against ``series``; raises IndexCorruptionError."""
        x = as_values(series)
        if x.size != self._size:
            raise IndexCorruptionError(f"index holds {self._size} positions, series has {x.size}")
        pos = self.sorted_positions
        if not np.array_equal(np.sort(pos), np.arange(x.size)):
            raise IndexCorruptionError("index positions are not a permutation of the series")
        if not np.array_equal(self.sorted_keys, np.floor(x[pos] * self.scale).astype(np.int64)):
            raise IndexCorruptionError("index keys disagree with series values")


def nearest_windows_indexed(index: QuantizedIndex, series, cfg: NnrConfig = NnrConfig(),
                            kernels=None, guard: int = 1) -> Neighbours:
    x = as_values(series)
    if len(index) != x.shape[0]:
        raise IndexCorruptionError(
            f"index holds {len(index)} positions but the series has {x.shape[0]}")
    _check_length(x, cfg)
    kern = kernels or _backend.kernels
    starts, dists, comps = kern.knn_indexed(
        x, cfg.window_m, cfg.k, index.sorted_keys, index.sorted_positions,
        float(index.scale), guard)
    return Neighbours(starts, dists, x[starts + cfg.window_m], comps)


def nnr_predict_indexed(index: QuantizedIndex, series, cfg: NnrConfig = NnrConfig()) -> float:
    nb = nearest_windows_indexed(index, series, cfg)
    return combine(nb.distances, nb.labels, cfg)


class NnrPredictor:
    """Streaming NNR estimator: a series, its index, and an optional compression policy."""

    def __init__(self, cfg: NnrConfig = NnrConfig(), policy=None, scale: int = DEFAULT_SCALE,
                 indexed: bool = True, lazy: bool = False):
        self.cfg = cfg
        self.policy = policy
        self.indexed = indexed
        # lazy: index catches up with the series only when a prediction is requested
        self.lazy = lazy
        self.series = SnrSeries()
        self.index = QuantizedIndex(scale)
        self.comparisons = 0
        self._last_compress_time: Optional[float] = None

    def update(self, time: float, snr_db: float) -> None:
        self.series.append(time, snr_db)
        if self.indexed and not self.lazy:
            self.index.insert(snr_db, len(self.series) - 1)
        if self.policy is not None:
            if self._last_compress_time is None:
                self._last_compress_time = time
            elapsed = time - self._last_compress_time
            if should_compress(self.series, self.policy, elapsed):
                self.series = compress(self.series, self.policy, elapsed)
                self._last_compress_time = time
                if self.indexed and not self.lazy:
                    self.index = QuantizedIndex.from_values(self.series.values, self.index.scale)
                else:
                    self.index = QuantizedIndex(self.index.scale)

    def ready(self) -> bool:
        return len(self.series) >= self.cfg.window_m + 1

    def sync_index(self) -> QuantizedIndex:
        n, have = len(self.series), len(self.index)
        if n - have > 32:
            self.index = QuantizedIndex.from_values(self.series.values, self.index.scale)
        else:
            values = self.series.values
            for pos in range(have, n):
                self.index.insert(values[pos], pos)
        return self.index

    def predict(self) -> float:
        if self.indexed:
            self.sync_index()
            nb = nearest_windows_indexed(self.index, self.series, self.cfg)
        else:
            nb = nearest_windows(self.series, self.cfg)
        self.comparisons += nb.comparisons
        return combine(nb.distances, nb.labels, self.cfg)
