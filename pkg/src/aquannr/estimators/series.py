"""Time-ordered SNR samples backed by growable numpy buffers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from ..errors import OrderingError, RejectedInputError


@dataclass(frozen=True)
class SnrSample:
    time: float
    snr_db: float

    def __post_init__(self):
        if not math.isfinite(self.snr_db):
            raise RejectedInputError(f"snr_db must be finite, got {self.snr_db!r}")
        if not math.isfinite(self.time) or self.time < 0:
            raise RejectedInputError(f"time must be finite and non-negative, got {self.time!r}")


class SnrSeries:
    """Ordered SNR samples with an optional compressed summary at the head.

    The summary (if any) is stored as the first element of :attr:`values`
    and takes part in window construction like any other sample. ``len()``
    counts every stored value, summary included; :attr:`raw_count` counts
    only uncompressed samples.
    """

    __slots__ = ("_t", "_x", "_n", "_has_prefix")

    def __init__(self, times: Iterable[float] = (), values: Iterable[float] = (),
                 compressed_prefix: Optional[SnrSample] = None):
        t = np.asarray(list(times), dtype=np.float64)
        x = np.asarray(list(values), dtype=np.float64)
        if t.shape != x.shape:
            raise RejectedInputError("times and values differ in length")
        if compressed_prefix is not None:
            t = np.concatenate(([compressed_prefix.time], t))
            x = np.concatenate(([compressed_prefix.snr_db], x))
        if not np.all(np.isfinite(x)):
            raise RejectedInputError("snr values must be finite")
        if t.size and (not np.all(np.isfinite(t)) or t[0] < 0):
            raise RejectedInputError("times must be finite and non-negative")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise OrderingError("times must be strictly increasing")
        cap = max(16, t.size)
        self._t = np.empty(cap)
        self._x = np.empty(cap)
        self._t[:t.size] = t
        self._x[:x.size] = x
        self._n = int(t.size)
        self._has_prefix = compressed_prefix is not None

    @classmethod
    def from_samples(cls, samples: Iterable[SnrSample],
                     compressed_prefix: Optional[SnrSample] = None) -> "SnrSeries":
        samples = list(samples)
        return cls([s.time for s in samples], [s.snr_db for s in samples], compressed_prefix)

    def append(self, time: float, snr_db: float) -> None:
        if not math.isfinite(snr_db):
            raise RejectedInputError(f"snr_db must be finite, got {snr_db!r}")
        if not math.isfinite(time) or time < 0:
            raise RejectedInputError(f"time must be finite and non-negative, got {time!r}")
        if self._n and time <= self._t[self._n - 1]:
            raise OrderingError(f"time {time} does not follow {self._t[self._n - 1]}")
        if self._n == self._t.size:
            self._t = np.concatenate((self._t, np.empty(self._n)))
            self._x = np.concatenate((self._x, np.empty(self._n)))
        self._t[self._n] = time
        self._x[self._n] = snr_db
        self._n += 1

    def __len__(self) -> int:
        return self._n

    @property
    def raw_count(self) -> int:
        return self._n - int(self._has_prefix)

    @property
    def values(self) -> np.ndarray:
        """Stored SNR values (summary first, if present). A read-only view."""
        v = self._x[:self._n]
        v.flags.writeable = False
        return v

    @property
    def times(self) -> np.ndarray:
        v = self._t[:self._n]
        v.flags.writeable = False
        return v

    @property
    def compressed_prefix(self) -> Optional[SnrSample]:
        if not self._has_prefix:
            return None
        return SnrSample(float(self._t[0]), float(self._x[0]))

    @property
    def samples(self) -> list[SnrSample]:
        """Uncompressed samples in time order."""
        start = int(self._has_prefix)
        return [SnrSample(float(t), float(x))
                for t, x in zip(self._t[start:self._n], self._x[start:self._n])]

    def last(self, count: int) -> np.ndarray:
        return self._x[max(0, self._n - count):self._n].copy()

    def copy(self) -> "SnrSeries":
        start = int(self._has_prefix)
        return SnrSeries(self._t[start:self._n], self._x[start:self._n], self.compressed_prefix)

    def __eq__(self, other):
        if not isinstance(other, SnrSeries):
            return NotImplemented
        return (self._has_prefix == other._has_prefix
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        prefix = ", compressed" if self._has_prefix else ""
        return f"SnrSeries(n={self._n}{prefix})"


def as_values(series) -> np.ndarray:
    """Return a contiguous float64 array for a series or any array-like."""
    if isinstance(series, SnrSeries):
        return np.ascontiguousarray(series.values)
    x = np.ascontiguousarray(series, dtype=np.float64)
    if x.ndim != 1:
        raise RejectedInputError("expected a one-dimensional series")
    return x
