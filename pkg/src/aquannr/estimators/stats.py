"""One-pass running mean and variance."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from ..errors import PredictionError, RejectedInputError, UndefinedVarianceError


@dataclass
class RunningStats:
    """Count, mean and sum of squared deviations, updated one value at a time."""

    count_i: int = 0
    mean_M: float = 0.0
    sum_sq_S: float = 0.0

    def push(self, x: float) -> "RunningStats":
        if not math.isfinite(x):
            raise RejectedInputError(f"value must be finite, got {x!r}")
        i = self.count_i + 1
        if i == 1:
            self.count_i, self.mean_M, self.sum_sq_S = 1, float(x), 0.0
            return self
        prev = self.mean_M
        # increment form: exact when x equals the running mean
        mean = prev + (x - prev) / i
        self.sum_sq_S += (x - mean) * (x - prev)
        self.mean_M = mean
        self.count_i = i
        return self

    @property
    def mean(self) -> float:
        if self.count_i == 0:
            raise PredictionError("mean of an empty stream is undefined")
        return self.mean_M

    @property
    def variance(self) -> float:
        if self.count_i < 2:
            raise UndefinedVarianceError("variance needs at least two values")
        return self.sum_sq_S / (self.count_i - 1)


def stats_update(stats: RunningStats, x: float) -> RunningStats:
    """Return a new RunningStats with ``x`` folded in; ``stats`` is left unchanged."""
    return replace(stats).push(x)


def mean_predict(stats: RunningStats) -> float:
    if stats.count_i < 1:
        raise PredictionError("cannot predict from empty stats")
    return stats.mean_M
