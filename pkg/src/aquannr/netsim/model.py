"""Node, packet and per-neighbour state for the routing simulator."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import DomainError
from ..estimators import CompressionPolicy, EmaState, NnrConfig, NnrPredictor, RunningStats, ema_update

VARIANCE_FLOOR = 1e-6


class NodeState(enum.Enum):
    INITIALIZATION = "Initialization"
    LISTENING = "Listening"
    FORWARDING = "Forwarding"


LEGAL_TRANSITIONS = {
    (NodeState.INITIALIZATION, NodeState.LISTENING),
    (NodeState.LISTENING, NodeState.FORWARDING),
    (NodeState.FORWARDING, NodeState.LISTENING),
}


class PacketKind(enum.Enum):
    HANDSHAKE = "Handshake"
    ACK = "Ack"
    DATA = "Data"


@dataclass
class Packet:
    kind: PacketKind
    source_id: int
    sender_id: int
    sequence: int
    birth_time: float
    designated_forwarder_id: Optional[int] = None
    hop_count: int = 0
    payload_bytes: int = 20
    sender_depth: float = 0.0
    sender_energy_ratio: float = 1.0


class NeighborRecord:
    """What a node knows about one neighbour: SNR history, its statistics, energy and depth."""

    __slots__ = ("neighbor_id", "predictor", "stats", "ema", "last_residual_energy_ratio",
                 "last_depth", "_last_time")

    def __init__(self, neighbor_id: int, nnr_cfg: NnrConfig = NnrConfig(),
                 policy: Optional[CompressionPolicy] = None, ema_alpha: float = 0.2):
        self.neighbor_id = neighbor_id
        self.predictor = NnrPredictor(nnr_cfg, policy=policy, indexed=True, lazy=True)
        self.stats = RunningStats()
        self.ema = EmaState(ema_alpha)
        self.last_residual_energy_ratio = 1.0
        self.last_depth = 0.0
        self._last_time = -math.inf

    @property
    def snr_series(self):
        return self.predictor.series

    @property
    def nnr_index(self):
        return self.predictor.sync_index()

    def observe(self, time: float, snr_db: float, depth: float, energy_ratio: float) -> None:
        # Two receptions from one sender can share a timestamp; keep times strictly increasing.
        if time <= self._last_time:
            time = math.nextafter(self._last_time, math.inf)
        self._last_time = time
        self.predictor.update(time, snr_db)
        self.stats.push(snr_db)
        self.ema = ema_update(self.ema, snr_db)
        self.last_depth = depth
        self.last_residual_energy_ratio = min(1.0, max(0.0, energy_ratio))

    def predicted_snr(self) -> float:
        """NNR estimate of the next SNR; the latest sample while history is too short."""
        if self.predictor.ready():
            return self.predictor.predict()
        return float(self.snr_series.values[-1])

    def gradient(self) -> float:
        v = self.snr_series.values
        return float(v[-1] - v[-2]) if v.size >= 2 else 0.0

    def variance(self) -> float:
        return self.stats.variance if self.stats.count_i >= 2 else 0.0


def sgn(x: float) -> int:
    return (x > 0) - (x < 0)


def adjusted_snr(s: float, g: float, alpha: float) -> float:
    """Predicted SNR nudged by the sign of its recent trend."""
    return s + alpha * sgn(g) * s


def forwarder_score(s: float, g: float, delta_d: float, m: float, v: float, E: float,
                    alpha: float, v_floor: float = VARIANCE_FLOOR) -> float:
    """Candidate score: stability (mean/variance) x energy x depth gain x trend-adjusted SNR."""
    if v < 0:
        raise DomainError(f"variance must be non-negative, got {v}")
    if not 0 <= E <= 1:
        raise DomainError(f"energy ratio must lie in [0, 1], got {E}")
    if not delta_d > 0:
        raise DomainError(f"depth gain must be positive, got {delta_d}")
    return m * E / max(v, v_floor) * delta_d * adjusted_snr(s, g, alpha)


@dataclass
class Node:
    id: int
    position: np.ndarray
    energy_initial: float
    energy_residual: float
    is_sink: bool = False
    state: NodeState = NodeState.INITIALIZATION
    neighbors: dict = field(default_factory=dict)
    busy_time: float = 0.0
    transitions: list = field(default_factory=list)

    @property
    def depth(self) -> float:
        return float(self.position[2])

    @property
    def energy_ratio(self) -> float:
        return self.energy_residual / self.energy_initial if self.energy_initial else 0.0

    @property
    def exhausted(self) -> bool:
        return self.energy_residual <= 0.0

    def set_state(self, new: NodeState, time: float) -> None:
        if new is self.state:
            return
        if (self.state, new) not in LEGAL_TRANSITIONS:
            raise RuntimeError(f"node {self.id}: illegal transition {self.state} -> {new}")
        self.transitions.append((time, self.state, new))
        self.state = new


@dataclass(frozen=True)
class EnergyModel:
    bandwidth_bps: float = 10_000.0
    power_send_w: float = 2.0
    power_recv_w: float = 0.1
    power_idle_w: float = 0.01

    def airtime(self, nbytes: int) -> float:
        return nbytes * 8 / self.bandwidth_bps

    def cost(self, activity: str, amount: float) -> float:
        """Joules for ``send``/``receive`` (amount in bytes) or ``idle`` (amount in seconds)."""
        if activity == "send":
            return self.power_send_w * self.airtime(amount)
        if activity == "receive":
            return self.power_recv_w * self.airtime(amount)
        if activity == "idle":
            return self.power_idle_w * amount
        raise ValueError(f"unknown activity {activity!r}")


def energy_charge(node: Node, activity: str, amount: float,
                  model: EnergyModel = EnergyModel()) -> float:
    """Deduct the cost of an activity from ``node``; returns the joules actually taken."""
    want = model.cost(activity, amount)
    taken = min(want, node.energy_residual)
    node.energy_residual -= taken
    if activity in ("send", "receive"):
        node.busy_time += model.airtime(amount)
    return taken


def mobility_step(position, dt: float, speed: float, area, rng: np.random.Generator,
                  is_sink: bool = False) -> np.ndarray:
    """Horizontal random-walk step with reflecting walls; depth is unchanged."""
    pos = np.array(position, dtype=np.float64)
    if is_sink or speed == 0 or dt == 0:
        return pos
    theta = rng.uniform(0.0, 2 * np.pi)
    step = speed * dt
    pos[0] += step * math.cos(theta)
    pos[1] += step * math.sin(theta)
    for axis in (0, 1):
        pos[axis] = float(_reflect(pos[axis], area[axis]))
    return pos


def _reflect(x, upper: float):
    """Fold ``x`` back into [0, upper] as if bouncing off both walls; works on arrays."""
    period = 2 * upper
    x = np.mod(x, period)
    return np.where(x > upper, period - x, x)
