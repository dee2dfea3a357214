"""Per-link SNR: mean link budget plus a slow periodic fluctuation."""

from __future__ import annotations

import math

import numpy as np

from ..channel import ChannelParams, TraceKind, TraceSpec, absorption_db_per_km, trace_values
from ..errors import NoLinkError


def link_seed(seed: int, a: int, b: int) -> int:
    """Deterministic seed for the unordered link {a, b}."""
    lo, hi = (a, b) if a <= b else (b, a)
    return int(np.random.SeedSequence([seed, lo, hi]).generate_state(1)[0])


class LinkModel:
    """SNR of any link at any time; fluctuation traces are built lazily and cached."""

    def __init__(self, params: ChannelParams, seed: int, duration_s: float,
                 amplitude_db: float, period_s: float, samples_per_period: int,
                 noise_db: float, tx_range: float, amplitude_spread: float = 0.0):
        self.params = params
        self.seed = seed
        self.tx_range = tx_range
        self.amplitude_db = amplitude_db
        self.amplitude_spread = amplitude_spread
        self.noise_db = noise_db
        self.period_s = period_s
        self.samples_per_period = samples_per_period
        self.sample_dt = period_s / samples_per_period
        # One spare period so any phase shift stays inside the trace.
        self._length = int(math.ceil((duration_s + 2 * period_s) / self.sample_dt)) + 2
        self._traces: dict = {}
        a = absorption_db_per_km(params.carrier_freq_f)
        self._absorption_db_per_m = a / 1000.0
        self._budget_db = (10.0 * math.log10(params.tx_power_P)
                           - 10.0 * math.log10(params.noise_psd_N * params.bandwidth_delta_f))

    def mean_snr_db(self, distance):
        """Link-budget SNR in dB; accepts scalars or arrays."""
        d = np.maximum(distance, 1e-3)
        return (self._budget_db - self.params.spreading_exponent * 10.0 * np.log10(d)
                - d * self._absorption_db_per_m)

    def _trace(self, a: int, b: int):
        key = (a, b) if a <= b else (b, a)
        tr = self._traces.get(key)
        if tr is None:
            s = link_seed(self.seed, *key)
            draw = np.random.default_rng([s, 1])
            offset = draw.uniform(0.0, self.period_s)
            amplitude = self.amplitude_db * (1.0 + self.amplitude_spread * draw.uniform(-1.0, 1.0))
            if amplitude == 0 and self.noise_db == 0:
                values = np.zeros(self._length)
            else:
                spec = TraceSpec(TraceKind.PERIOD_WITH_NOISE, length_n=self._length, base_db=0.0,
                                 amplitude_db=amplitude,
                                 period_samples=self.samples_per_period,
                                 noise_sigma_db=self.noise_db, seed=s)
                values = trace_values(spec)
            tr = (offset, values)
            self._traces[key] = tr
        return tr

    def fluctuation_db(self, a: int, b: int, t: float) -> float:
        offset, values = self._trace(a, b)
        u = (t + offset) / self.sample_dt
        i = int(u)
        if i < 0:
            return float(values[0])
        if i + 1 >= values.size:
            return float(values[-1])
        frac = u - i
        return float(values[i] + frac * (values[i + 1] - values[i]))

    def snr_db(self, a: int, b: int, t: float, distance: float) -> float:
        return float(self.mean_snr_db(distance)) + self.fluctuation_db(a, b, t)


def link_snr_at(model: LinkModel, a: int, b: int, time: float, distance: float) -> float:
    """SNR in dB of link {a, b} at ``time``; the endpoints must be within range."""
    if distance > model.tx_range:
        raise NoLinkError(f"nodes {a} and {b} are {distance:.1f} m apart, beyond range {model.tx_range}")
    return model.snr_db(a, b, time, distance)
