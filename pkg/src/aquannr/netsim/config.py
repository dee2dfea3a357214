"""Simulation parameters and their flat ``key=value`` text form."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Mapping, Optional

from ..errors import ConfigError


class Protocol(str, enum.Enum):
    DBCAR = "DBCAR"
    DBR = "DBR"
    CARP_LIKE = "CARP_LIKE"

    @classmethod
    def parse(cls, text) -> "Protocol":
        if isinstance(text, Protocol):
            return text
        key = str(text).strip().upper().replace("-", "_")
        if key == "CARP":
            key = "CARP_LIKE"
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown protocol {text!r}; expected one of dbcar, dbr, carp") from None


@dataclass(frozen=True)
class SimConfig:
    area: tuple = (500.0, 500.0, 500.0)
    node_count: int = 100              # sinks included
    sink_count: int = 3
    sink_layout: str = "spread"        # "spread" (even pattern) or "random"
    tx_range_R: float = 150.0
    bandwidth_bps: float = 10_000.0
    power_send_w: float = 2.0
    power_recv_w: float = 0.1
    power_idle_w: float = 0.01
    packet_rate: float = 0.1
    duration_s: float = 10_000.0
    sound_speed: float = 1500.0
    protocol: Protocol = Protocol.DBCAR
    gradient_alpha: float = 0.15
    dbr_delta: Optional[float] = None  # defaults to R/4
    ttl: int = 50
    retry_limit: int = 3
    mobility_speed: float = 0.5
    mobility_interval_s: float = 10.0
    seed: int = 0
    data_bytes: int = 100
    control_bytes: int = 20
    energy_initial_j: float = 1000.0
    # link budget
    tx_power_w: float = 1.0
    carrier_khz: float = 10.0
    spreading_exponent: float = 1.5
    noise_psd: float = 1.0e-8
    signal_bandwidth_hz: float = 5.0e3
    # slow periodic fluctuation superimposed on every link's mean SNR
    fluct_amplitude_db: float = 5.0
    fluct_amplitude_spread: float = 0.0  # per-link amplitude = base x (1 + spread x U(-1, 1))
    fluct_period_s: float = 600.0
    fluct_samples_per_period: int = 24
    fluct_noise_db: float = 0.5
    perfect_channel: bool = False
    # estimators kept per neighbour
    nnr_window_m: int = 3
    nnr_k: int = 3
    ema_alpha: float = 0.2
    storage_limit: int = 10_000
    # timing
    init_spread_s: float = 2.0
    guard_s: float = 0.01
    retry_backoff_s: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol.parse(self.protocol))
        area = tuple(float(a) for a in self.area)
        object.__setattr__(self, "area", area)
        if len(area) != 3 or min(area) <= 0:
            raise ConfigError("area must be three positive extents (x, y, depth)")
        if self.node_count < 2:
            raise ConfigError(f"node_count must be at least 2, got {self.node_count}")
        if not 1 <= self.sink_count < self.node_count:
            raise ConfigError("sink_count must be at least 1 and leave room for a source")
        positive = ("tx_range_R", "bandwidth_bps", "power_send_w", "power_recv_w", "power_idle_w",
                    "packet_rate", "duration_s", "sound_speed", "ttl", "data_bytes",
                    "control_bytes", "energy_initial_j", "tx_power_w", "carrier_khz",
                    "noise_psd", "signal_bandwidth_hz", "fluct_period_s",
                    "fluct_samples_per_period", "mobility_interval_s", "nnr_window_m", "nnr_k",
                    "storage_limit")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        nonneg = ("retry_limit", "mobility_speed", "fluct_amplitude_db", "fluct_noise_db",
                  "init_spread_s", "guard_s", "retry_backoff_s")
        for name in nonneg:
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative, got {getattr(self, name)}")
        if not 0 <= self.fluct_amplitude_spread <= 1:
            raise ConfigError("fluct_amplitude_spread must lie in [0, 1]")
        if self.sink_layout not in ("spread", "random"):
            raise ConfigError(f"sink_layout must be 'spread' or 'random', got {self.sink_layout!r}")
        if not 0 <= self.gradient_alpha <= 0.3:
            raise ConfigError(f"gradient_alpha must lie in [0, 0.3], got {self.gradient_alpha}")
        if self.dbr_delta is not None and not 0 <= self.dbr_delta < self.tx_range_R:
            raise ConfigError("dbr_delta must lie in [0, tx_range_R)")
        if not 1 <= self.spreading_exponent <= 2:
            raise ConfigError("spreading_exponent must lie in [1, 2]")
        if not 0 < self.ema_alpha <= 1:
            raise ConfigError("ema_alpha must lie in (0, 1]")

    @property
    def depth_threshold(self) -> float:
        return self.tx_range_R / 4 if self.dbr_delta is None else self.dbr_delta

    @property
    def packet_interval_s(self) -> float:
        return 1.0 / self.packet_rate

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)

    def to_pairs(self) -> list[tuple[str, str]]:
        out = []
        for f in fields(self):
            out.append((f.name, format_value(getattr(self, f.name))))
        return out

    @classmethod
    def from_mapping(cls, values: Mapping[str, str], base: Optional["SimConfig"] = None) -> "SimConfig":
        base = base or cls()
        types = {f.name: f for f in fields(cls)}
        changes = {}
        for key, raw in values.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            changes[key] = parse_value(key, raw, getattr(base, key))
        try:
            return replace(base, **changes)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None


def format_value(value) -> str:
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, tuple):
        return ",".join(format_value(v) for v in value)
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_value(key: str, raw, current):
    """Coerce ``raw`` text to the type of the field's current value."""
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if key == "protocol":
            return Protocol.parse(text)
        if key == "area":
            return tuple(float(p) for p in text.split(","))
        if key == "dbr_delta":
            return None if text.lower() in ("", "none") else float(text)
        if isinstance(current, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
    except ValueError:
        raise ConfigError(f"invalid value {raw!r} for key {key!r}") from None
    return text


def config_dict(cfg: SimConfig) -> dict:
    return asdict(cfg)
