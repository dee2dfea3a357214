"""Estimator accuracy harness and NNR optimisation measurements.

CSV schemas
-----------
trace input/output   ``time_s,snr_db``
accuracy table       ``dataset,size,estimator,best_rate,avg_abs_error``
optimisation table   ``n,variant,wall_ns,comparisons,stored_samples,error_delta_pct``
"""

from __future__ import annotations

import csv
import math
import re
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import _backend
from .channel import TraceKind, TraceSpec, gen_trace, trace_values
from .errors import EmptySeriesError, EvaluationError, OrderingError, ParseError
from .estimators import (
    CompressionPolicy,
    EmaState,
    NnrConfig,
    NnrPredictor,
    QuantizedIndex,
    RunningStats,
    SnrSeries,
    ar_fit,
    ar_predict,
    ema_update,
    nearest_windows,
    nearest_windows_indexed,
)
from .estimators.baselines import DEFAULT_EMA_ALPHA, DEFAULT_FIT_WINDOW

TRACE_HEADER = ("time_s", "snr_db")
BENCH_HEADER = ("dataset", "size", "estimator", "best_rate", "avg_abs_error")
OPT_HEADER = ("n", "variant", "wall_ns", "comparisons", "stored_samples", "error_delta_pct")
DEFAULT_ESTIMATORS = ("mean", "ema", "ar2", "ar5", "nnr")


# -- CSV -------------------------------------------------------------------

def load_csv(path) -> SnrSeries:
    path = Path(path)
    times, values = [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRACE_HEADER:
            raise ParseError(f"expected header {','.join(TRACE_HEADER)}, got {header}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", line=lineno)
            try:
                t, x = float(row[0]), float(row[1])
            except ValueError:
                raise ParseError(f"non-numeric field in {row}", line=lineno) from None
            if not (math.isfinite(t) and math.isfinite(x)):
                raise ParseError(f"non-finite field in {row}", line=lineno)
            if times and t <= times[-1]:
                raise OrderingError(f"line {lineno}: time {t} does not follow {times[-1]}")
            times.append(t)
            values.append(x)
    if not times:
        raise EmptySeriesError(f"{path}: no samples")
    return SnrSeries(times, values)


def write_csv(series: SnrSeries, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for t, x in zip(series.times.tolist(), series.values.tolist()):
            w.writerow((repr(t), repr(x)))


# -- estimators under test ---------------------------------------------------

class MeanEstimator:
    name = "mean"
    min_history = 1

    def __init__(self):
        self.stats = RunningStats()

    def update(self, t, x):
        self.stats.push(x)

    def predict(self):
        return self.stats.mean_M


class EmaEstimator:
    name = "ema"
    min_history = 1

    def __init__(self, alpha=DEFAULT_EMA_ALPHA):
        self.state = EmaState(alpha)

    def update(self, t, x):
        self.state = ema_update(self.state, x)

    def predict(self):
        return self.state.s


class ArEstimator:
    """Refits AR(p) on the rolling window before every prediction."""

    def __init__(self, order, fit_window=DEFAULT_FIT_WINDOW):
        self.order = order
        self.fit_window = fit_window
        self.name = f"ar{order}"
        self.min_history = order + 2
        self._buf: list[float] = []

    def update(self, t, x):
        self._buf.append(x)
        if len(self._buf) > 2 * self.fit_window:
            del self._buf[:-self.fit_window]

    def predict(self):
        hist = np.asarray(self._buf[-self.fit_window:])
        return ar_predict(ar_fit(hist, self.order, self.fit_window), hist)


class NnrEstimator:
    def __init__(self, cfg: NnrConfig = NnrConfig(), policy=None, indexed=True):
        self.name = "nnr"
        self.min_history = cfg.window_m + 1
        self._p = NnrPredictor(cfg, policy=policy, indexed=indexed)

    def update(self, t, x):
        self._p.update(t, x)

    def predict(self):
        return self._p.predict()


def make_estimator(name: str, nnr_cfg: NnrConfig = NnrConfig()):
    key = name.strip().lower()
    if key == "mean":
        return MeanEstimator()
    if key == "ema":
        return EmaEstimator()
    if key == "nnr":
        return NnrEstimator(nnr_cfg)
    m = re.fullmatch(r"ar\(?(\d+)\)?", key)
    if m and int(m.group(1)) >= 1:
        return ArEstimator(int(m.group(1)))
    raise ValueError(f"unknown estimator {name!r}; valid: mean, ema, ar<p> (p>=1), nnr")


def valid_estimator(name: str) -> bool:
    try:
        make_estimator(name)
    except ValueError:
        return False
    return True


# -- evaluation ----------------------------------------------------------------

@dataclass
class EstimatorScore:
    best_count: int = 0
    best_rate: float = 0.0
    avg_abs_error: float = 0.0


@dataclass
class EvalResult:
    scores: dict = field(default_factory=dict)
    steps_evaluated: int = 0
    warmup_steps: int = 0

    def ranking(self, by="best_rate"):
        key = (lambda kv: -kv[1].best_rate) if by == "best_rate" else (lambda kv: kv[1].avg_abs_error)
        return [name for name, _ in sorted(self.scores.items(), key=key)]


def evaluate(series, estimators: Sequence[str] = DEFAULT_ESTIMATORS,
             nnr_cfg: NnrConfig = NnrConfig()) -> EvalResult:
    """One-step-ahead comparison on a shared history.

    At step t every estimator has seen exactly x[0..t-1] and predicts x[t].
    All estimators attaining the smallest absolute error at a step are
    credited with a best estimation.
    """
    if isinstance(series, SnrSeries):
        times, x = series.times.tolist(), series.values.tolist()
    else:
        x = [float(v) for v in series]
        times = [float(i) for i in range(len(x))]
    ests = [make_estimator(e, nnr_cfg) for e in estimators]
    names = [e.name for e in ests]
    if len(set(names)) != len(names):
        raise EvaluationError(f"duplicate estimators in {list(estimators)}")
    warmup = max(e.min_history for e in ests)
    n = len(x)
    if n <= warmup:
        raise EvaluationError(f"series of {n} samples is too short (warm-up {warmup})")
    best = [0] * len(ests)
    err_sum = [0.0] * len(ests)
    for t in range(n):
        if t >= warmup:
            errs = [abs(e.predict() - x[t]) for e in ests]
            lo = min(errs)
            for i, err in enumerate(errs):
                err_sum[i] += err
                if err == lo:
                    best[i] += 1
        for e in ests:
            e.update(times[t], x[t])
    steps = n - warmup
    scores = {name: EstimatorScore(best[i], best[i] / steps, err_sum[i] / steps)
              for i, name in enumerate(names)}
    return EvalResult(scores, steps, warmup)


def spec_label(spec: TraceSpec) -> str:
    return f"{spec.kind.value}-seed{spec.seed}"


def sweep(sizes: Iterable[int], specs: Iterable[TraceSpec],
          estimators: Sequence[str] = DEFAULT_ESTIMATORS,
          nnr_cfg: NnrConfig = NnrConfig()) -> list[tuple[str, int, EvalResult]]:
    """Evaluate each (size, spec) cell on the first ``size`` samples of that trace."""
    rows = []
    for spec in specs:
        for size in sizes:
            series = gen_trace(replace(spec, length_n=size))
            rows.append((spec_label(spec), size, evaluate(series, estimators, nnr_cfg)))
    return rows


def sweep_rows(table) -> list[tuple]:
    out = []
    for dataset, size, res in table:
        for name, sc in res.scores.items():
            out.append((dataset, size, name, sc.best_rate, sc.avg_abs_error))
    return out


def write_bench_csv(rows, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BENCH_HEADER)
        for dataset, size, name, rate, err in rows:
            w.writerow((dataset, size, name, f"{rate:.6f}", f"{err:.9g}"))


# -- optimisation measurements ---------------------------------------------------

@dataclass
class OptRow:
    n: int
    variant: str
    wall_ns: int
    comparisons: int
    stored_samples: int
    error_delta_pct: float

    def as_tuple(self):
        return (self.n, self.variant, self.wall_ns, self.comparisons, self.stored_samples,
                self.error_delta_pct)


def compressed_error_delta(x, cfg: NnrConfig, policy: CompressionPolicy,
                           start: int | None = None) -> tuple[float, float, float]:
    """Mean absolute one-step error of plain vs. compressed NNR on ``x``.

    Only steps from ``start`` (default: the first compression) are scored,
    since before that both pipelines hold identical data. Returns
    ``(err_plain, err_compressed, relative_delta_pct)``.
    """
    x = np.asarray(x, dtype=np.float64)
    if start is None:
        start = policy.storage_limit_L
    plain = NnrPredictor(cfg, indexed=False)
    packed = NnrPredictor(cfg, policy=policy, indexed=False)
    e_plain = e_packed = 0.0
    count = 0
    for t, v in enumerate(x.tolist()):
        if t >= max(start, cfg.window_m + 1):
            e_plain += abs(plain.predict() - v)
            e_packed += abs(packed.predict() - v)
            count += 1
        plain.update(float(t), v)
        packed.update(float(t), v)
    if not count:
        raise EvaluationError("series too short to score compression")
    e_plain /= count
    e_packed /= count
    delta = 100.0 * abs(e_packed - e_plain) / e_plain if e_plain else 0.0
    return e_plain, e_packed, delta


def stream_with_compression(x, policy: CompressionPolicy) -> SnrSeries:
    """Stored series after feeding ``x`` (at t = 0, 1, ...) through the policy.

    Equivalent to appending one sample at a time and compressing whenever
    the trigger fires, but done block-wise.
    """
    x = np.asarray(x, dtype=np.float64)
    t = np.arange(x.size, dtype=np.float64)
    L = policy.storage_limit_L
    stop = min(L, x.size)
    series = SnrSeries(t[:stop], x[:stop])
    from .estimators import compress

    while True:
        new = compress(series, policy)
        if new is series:
            return series
        series = new
        take = min(L - series.raw_count, x.size - stop)
        raw_t = np.concatenate((series.times[1:], t[stop:stop + take]))
        raw_x = np.concatenate((series.values[1:], x[stop:stop + take]))
        series = SnrSeries(raw_t, raw_x, series.compressed_prefix)
        stop += take
        if take == 0:
            return series


def measure_optimization(n_values: Iterable[int], cfg: NnrConfig = NnrConfig(),
                         policy: CompressionPolicy = CompressionPolicy(),
                         sigma: float = 2.0, seed: int = 0, repeats: int = 3,
                         error_trace: TraceSpec | None = None) -> list[OptRow]:
    """Time/space comparison of naive, indexed and compressed NNR.

    For each n, a normal series (std ``sigma``) is searched by the naive and
    indexed kernels; wall time and comparisons are averaged over
    ``repeats`` queries ending at successive points. The compressed variant
    searches the storage left after streaming the same samples through
    ``policy``. Its error delta is measured on a periodic-with-noise trace
    of length n and is only defined once n exceeds the storage limit.
    """
    rows = []
    for n in n_values:
        rng = np.random.default_rng(seed + n)
        x = rng.normal(0.0, sigma, n + repeats - 1)
        acc = {"naive": [0, 0], "indexed": [0, 0], "compressed": [0, 0]}
        for r in range(repeats):
            view = x[:n + r]
            packed = stream_with_compression(view, policy).values
            index = QuantizedIndex.from_values(view)
            packed_index = QuantizedIndex.from_values(packed)
            for variant, call in (
                    ("naive", lambda: nearest_windows(view, cfg)),
                    ("indexed", lambda: nearest_windows_indexed(index, view, cfg)),
                    ("compressed", lambda: nearest_windows_indexed(packed_index, packed, cfg))):
                t0 = time.perf_counter_ns()
                nb = call()
                acc[variant][0] += time.perf_counter_ns() - t0
                acc[variant][1] += nb.comparisons
        stored_packed = len(stream_with_compression(x[:n], policy))
        delta = float("nan")
        if n > policy.storage_limit_L:
            spec = error_trace or TraceSpec(TraceKind.PERIOD_WITH_NOISE, length_n=n,
                                            noise_sigma_db=0.5, seed=seed)
            _, _, delta = compressed_error_delta(trace_values(replace(spec, length_n=n)),
                                                 cfg, policy)
        for variant, (ns, comps) in acc.items():
            stored = stored_packed if variant == "compressed" else n
            rows.append(OptRow(n, variant, ns // repeats, comps // repeats, stored,
                               delta if variant == "compressed" else 0.0))
    return rows


def write_opt_csv(rows: Iterable[OptRow], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OPT_HEADER)
        for r in rows:
            delta = "" if math.isnan(r.error_delta_pct) else f"{r.error_delta_pct:.6f}"
            w.writerow((r.n, r.variant, r.wall_ns, r.comparisons, r.stored_samples, delta))


def backend_name() -> str:
    return "compiled" if _backend.COMPILED else "fallback"
