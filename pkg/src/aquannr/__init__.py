"""Nearest-neighbour SNR prediction and depth-based routing simulation for underwater acoustic networks."""

__version__ = "0.1.0"

from ._backend import COMPILED
from .channel import (
    ChannelParams,
    TraceKind,
    TraceSpec,
    absorption_db_per_km,
    attenuation_db,
    bit_error_prob,
    gen_trace,
    packet_success_prob,
    snr_db,
    snr_linear,
)
from .estimators import (
    CompressionPolicy,
    NnrConfig,
    NnrPredictor,
    QuantizedIndex,
    RunningStats,
    SnrSample,
    SnrSeries,
    nnr_predict,
    nnr_predict_indexed,
)

__all__ = [
    "COMPILED", "ChannelParams", "CompressionPolicy", "NnrConfig", "NnrPredictor",
    "QuantizedIndex", "RunningStats", "SnrSample", "SnrSeries", "TraceKind", "TraceSpec",
    "absorption_db_per_km", "attenuation_db", "bit_error_prob", "gen_trace", "nnr_predict",
    "nnr_predict_indexed", "packet_success_prob", "snr_db", "snr_linear", "__version__",
]
