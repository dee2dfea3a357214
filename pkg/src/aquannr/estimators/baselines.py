"""Linear one-step predictors: exponential moving average and AR(p)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, FitError, PredictionError, RejectedInputError
from .series import as_values

DEFAULT_EMA_ALPHA = 0.2
DEFAULT_FIT_WINDOW = 200
# Relative singular-value cutoff for declaring the AR design matrix singular.
# Exactly periodic inputs give rank-deficient lag columns that numpy's default
# cutoff only catches intermittently.
AR_RCOND = 1e-10


@dataclass(frozen=True)
class EmaState:
    alpha: float = DEFAULT_EMA_ALPHA
    s: float = 0.0
    initialized: bool = False

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")


def ema_update(state: EmaState, y: float) -> EmaState:
    if not math.isfinite(y):
        raise RejectedInputError(f"value must be finite, got {y!r}")
    if not state.initialized:
        return EmaState(state.alpha, float(y), True)
    # s + a(y - s) equals a*y + (1 - a)*s and is exact for a constant input
    return EmaState(state.alpha, state.s + state.alpha * (y - state.s), True)


@dataclass(frozen=True)
class ArModel:
    order: int
    intercept: float
    coefficients: tuple
    degenerate: bool = False

    def __post_init__(self):
        if self.order < 1:
            raise DomainError("AR order must be positive")
        if len(self.coefficients) != self.order:
            raise DomainError("coefficient count must equal the order")


def ar_fit(series, order: int, fit_window: int = DEFAULT_FIT_WINDOW) -> ArModel:
    """Least-squares AR(p) fit with intercept over the latest ``fit_window`` samples.

    A rank-deficient design (e.g. a constant series) yields an intercept-only
    model at the sample mean, flagged ``degenerate``.
    """
    if order < 1:
        raise DomainError("AR order must be positive")
    x = as_values(series)[-fit_window:]
    n = x.shape[0]
    if n < order + 2:
        raise FitError(f"AR({order}) needs at least {order + 2} samples, got {n}")
    rows = n - order
    design = np.empty((rows, order + 1))
    design[:, 0] = 1.0
    for i in range(1, order + 1):
        design[:, i] = x[order - i:n - i]
    target = x[order:]
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=AR_RCOND)
    if rank < order + 1:
        return ArModel(order, float(x.mean()), (0.0,) * order, degenerate=True)
    return ArModel(order, float(coef[0]), tuple(float(c) for c in coef[1:]))


def ar_predict(model: ArModel, series) -> float:
    x = as_values(series)
    if x.shape[0] < model.order:
        raise PredictionError(f"AR({model.order}) prediction needs {model.order} samples")
    y = model.intercept
    for i, phi in enumerate(model.coefficients, start=1):
        y += phi * x[-i]
    return float(y)
