"""SNR time-series predictors."""

from .baselines import ArModel, EmaState, ar_fit, ar_predict, ema_update
from .compression import CompressionPolicy, compress, should_compress
from .nnr import (
    SENTINEL_MIN,
    Neighbours,
    NnrConfig,
    NnrPredictor,
    QuantizedIndex,
    combine,
    idw_weights,
    nearest_windows,
    nearest_windows_indexed,
    nnr_predict,
    nnr_predict_indexed,
    prune_interval,
    window_distance,
)
from .series import SnrSample, SnrSeries
from .stats import RunningStats, mean_predict, stats_update

__all__ = [
    "ArModel", "CompressionPolicy", "EmaState", "Neighbours", "NnrConfig", "NnrPredictor",
    "QuantizedIndex", "RunningStats", "SENTINEL_MIN", "SnrSample", "SnrSeries", "ar_fit",
    "ar_predict", "combine", "compress", "ema_update", "idw_weights", "mean_predict",
    "nearest_windows", "nearest_windows_indexed", "nnr_predict", "nnr_predict_indexed",
    "prune_interval", "should_compress", "stats_update", "window_distance",
]
