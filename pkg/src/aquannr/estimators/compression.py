"""Bounded-memory storage: fold the oldest samples into one weighted summary."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import DomainError
from .series import SnrSample, SnrSeries


@dataclass(frozen=True)
class CompressionPolicy:
    storage_limit_L: int = 10_000
    fraction_alpha: float = 0.2
    period_T: Optional[float] = None
    idw_exponent: int = -2

    def __post_init__(self):
        if self.storage_limit_L < 2:
            raise DomainError("storage_limit_L must be >= 2")
        if not 0 <= self.fraction_alpha <= 0.5:
            raise DomainError("fraction_alpha must lie in [0, 0.5]")
        if self.period_T is not None and not self.period_T > 0:
            raise DomainError("period_T must be positive when set")
        if self.idw_exponent > -1:
            raise DomainError("idw_exponent must be a negative integer")

    @property
    def block(self) -> int:
        """Number of raw samples folded per compression."""
        return int(math.floor(self.fraction_alpha * self.storage_limit_L + 1e-9))


def should_compress(series: SnrSeries, policy: CompressionPolicy,
                    elapsed: Optional[float] = None) -> bool:
    if series.raw_count >= policy.storage_limit_L:
        return True
    return policy.period_T is not None and elapsed is not None and elapsed >= policy.period_T


def compress(series: SnrSeries, policy: CompressionPolicy,
             elapsed: Optional[float] = None) -> SnrSeries:
    """Replace the oldest ``alpha*L`` raw samples (plus any earlier summary) by one summary.

    The summary value is the average of the folded samples weighted by
    ``(t_newest - t_i) ** idw_exponent``, where ``t_newest`` is the latest
    time in the series; it is stamped with the latest folded time. Below
    the trigger the input is returned unchanged.
    """
    if not should_compress(series, policy, elapsed):
        return series
    block = min(policy.block, series.raw_count - 1)
    if block <= 0:
        return series
    start = 0 if series.compressed_prefix is None else 1
    stop = start + block
    times = series.times
    values = series.values
    t_fold = times[:stop]
    x_fold = values[:stop]
    w = (times[-1] - t_fold) ** float(policy.idw_exponent)
    w /= w.sum()
    # Offset by the first value so equal inputs reproduce themselves exactly.
    summary_value = float(x_fold[0] + np.dot(w, x_fold - x_fold[0]))
    prefix = SnrSample(float(t_fold[-1]), summary_value)
    return SnrSeries(times[stop:], values[stop:], compressed_prefix=prefix)
