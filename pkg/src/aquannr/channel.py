"""Acoustic link budget and synthetic SNR trace generators.

Distances are in metres, frequencies in kHz. Absorption follows Thorp's
empirical formula; spreading loss uses an exponent between 1 (cylindrical)
and 2 (spherical).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError
from .estimators.series import SnrSeries


def absorption_db_per_km(f_khz: float) -> float:
    """Thorp absorption coefficient in dB/km for a carrier of ``f_khz`` kHz."""
    if not f_khz > 0:
        raise DomainError(f"frequency must be positive, got {f_khz}")
    f2 = f_khz * f_khz
    return 0.11 * f2 / (1 + f2) + 44.0 * f2 / (4100 + f2) + 2.75e-4 * f2 + 0.003


@dataclass(frozen=True)
class ChannelParams:
    tx_power_P: float = 1.0          # W
    carrier_freq_f: float = 10.0     # kHz
    spreading_exponent: float = 1.5
    noise_psd_N: float = 1.0e-8      # W/Hz, flat
    bandwidth_delta_f: float = 5.0e3  # Hz

    def __post_init__(self):
        for name in ("tx_power_P", "carrier_freq_f", "noise_psd_N", "bandwidth_delta_f"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if not 1 <= self.spreading_exponent <= 2:
            raise DomainError("spreading_exponent must lie in [1, 2]")


def attenuation_db(l_m: float, params: ChannelParams) -> float:
    if not l_m > 0:
        raise DomainError(f"distance must be positive, got {l_m}")
    return (params.spreading_exponent * 10.0 * math.log10(l_m)
            + (l_m / 1000.0) * absorption_db_per_km(params.carrier_freq_f))


def snr_db(l_m: float, params: ChannelParams) -> float:
    """Mean SNR in dB, computed entirely in the log domain."""
    return (10.0 * math.log10(params.tx_power_P) - attenuation_db(l_m, params)
            - 10.0 * math.log10(params.noise_psd_N * params.bandwidth_delta_f))


def snr_linear(l_m: float, params: ChannelParams) -> float:
    a_lin = 10.0 ** (attenuation_db(l_m, params) / 10.0)
    return (params.tx_power_P / a_lin) / (params.noise_psd_N * params.bandwidth_delta_f)


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def bit_error_prob(snr: float) -> float:
    if snr < 0 or math.isnan(snr):
        raise DomainError(f"snr must be non-negative, got {snr}")
    return 0.5 * math.erfc(math.sqrt(snr))


def packet_success_prob(snr: float, packet_bits_L: int) -> float:
    """Probability that all ``packet_bits_L`` bits survive at linear SNR ``snr``."""
    if packet_bits_L < 1:
        raise DomainError("packet length must be at least one bit")
    return (1.0 - bit_error_prob(snr)) ** packet_bits_L


class TraceKind(str, enum.Enum):
    IDEAL_PERIOD = "IdealPeriod"
    PERIOD_WITH_NOISE = "PeriodWithNoise"
    RANDOM_PERIOD_WITH_NOISE = "RandomPeriodWithNoise"

    @classmethod
    def parse(cls, text: str) -> "TraceKind":
        aliases = {"ideal": cls.IDEAL_PERIOD, "noise": cls.PERIOD_WITH_NOISE,
                   "period-noise": cls.PERIOD_WITH_NOISE,
                   "random": cls.RANDOM_PERIOD_WITH_NOISE,
                   "random-period": cls.RANDOM_PERIOD_WITH_NOISE}
        key = text.strip()
        if key.lower() in aliases:
            return aliases[key.lower()]
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown trace kind {text!r}") from None


#: Relative amplitude and phase (rad) of each harmonic of the periodic
#: waveform. A single fundamental gives a pure sinusoid, which AR(2) predicts
#: exactly; the default adds overtones so the shape is periodic but not a
#: low-order linear recurrence.
DEFAULT_HARMONICS = ((1.0, 0.0), (0.6, 0.9), (0.4, 2.1), (0.25, 0.4))
SINE = ((1.0, 0.0),)


@dataclass(frozen=True)
class TraceSpec:
    kind: TraceKind = TraceKind.IDEAL_PERIOD
    length_n: int = 1000
    base_db: float = 15.0
    amplitude_db: float = 5.0
    period_samples: int = 24
    noise_sigma_db: float = 0.0
    period_jitter_fraction: float = 0.0
    seed: int = 0
    sample_interval_s: float = 1.0
    harmonics: tuple = DEFAULT_HARMONICS

    def __post_init__(self):
        object.__setattr__(self, "kind", TraceKind(self.kind))
        object.__setattr__(self, "harmonics",
                           tuple((float(a), float(p)) for a, p in self.harmonics))
        if not self.harmonics or sum(abs(a) for a, _ in self.harmonics) == 0:
            raise ConfigError("harmonics must contain a non-zero amplitude")
        if self.length_n < 1:
            raise ConfigError("length_n must be positive")
        if self.amplitude_db < 0:
            raise ConfigError("amplitude_db must be non-negative")
        if self.period_samples < 1:
            raise ConfigError("period_samples must be positive")
        if self.noise_sigma_db < 0:
            raise ConfigError("noise_sigma_db must be non-negative")
        if not 0 <= self.period_jitter_fraction < 1:
            raise ConfigError("period_jitter_fraction must lie in [0, 1)")
        if not self.sample_interval_s > 0:
            raise ConfigError("sample_interval_s must be positive")
        if self.kind is TraceKind.IDEAL_PERIOD and (self.noise_sigma_db or self.period_jitter_fraction):
            raise ConfigError("IdealPeriod traces take no noise and no jitter")
        if self.kind is TraceKind.PERIOD_WITH_NOISE and self.period_jitter_fraction:
            raise ConfigError("PeriodWithNoise traces take no jitter")


def _phase_fixed(n: int, period: int) -> np.ndarray:
    # Reduce modulo the period first so the waveform repeats bit-exactly.
    return (np.arange(n) % period) / period


def _phase_jittered(n: int, period: int, jitter: float, rng: np.random.Generator) -> np.ndarray:
    phase = np.empty(n)
    t = 0
    while t < n:
        p = period * (1 + rng.uniform(-jitter, jitter)) if jitter else float(period)
        span = max(1, int(round(p)))
        idx = np.arange(span)
        take = min(span, n - t)
        phase[t:t + take] = idx[:take] / span
        t += take
    return phase


def trace_values(spec: TraceSpec) -> np.ndarray:
    """Samples of ``base + amplitude * shape(phase)`` plus optional Gaussian noise."""
    rng = np.random.default_rng(spec.seed)
    if spec.kind is TraceKind.RANDOM_PERIOD_WITH_NOISE:
        phase = _phase_jittered(spec.length_n, spec.period_samples,
                                spec.period_jitter_fraction, rng)
    else:
        phase = _phase_fixed(spec.length_n, spec.period_samples)
    shape = np.zeros(spec.length_n)
    for order, (rel, offset) in enumerate(spec.harmonics, start=1):
        shape += rel * np.sin(2 * np.pi * order * phase + offset)
    # Peak excursion never exceeds amplitude_db.
    shape /= sum(abs(a) for a, _ in spec.harmonics)
    x = spec.base_db + spec.amplitude_db * shape
    if spec.kind is not TraceKind.IDEAL_PERIOD and spec.noise_sigma_db > 0:
        x = x + rng.normal(0.0, spec.noise_sigma_db, spec.length_n)
    return x


def gen_trace(spec: TraceSpec) -> SnrSeries:
    x = trace_values(spec)
    t = np.arange(spec.length_n) * spec.sample_interval_s
    return SnrSeries(t, x)
