"""Discrete-event simulation of a depth-routed underwater sensor field.

Three forwarding schemes share one physical layer:

* ``DBCAR``: handshake, collect Acks, score candidates on predicted SNR,
  its trend, link stability, residual energy and depth gain.
* ``CARP_LIKE``: same handshake, candidates scored on EMA SNR times depth gain.
* ``DBR``: no handshake; receivers that gained enough depth rebroadcast after
  a holding time and cancel when they overhear the same packet first.

The broadcast medium is idealised: every node in range hears every
transmission, each reception succeeds with the packet success probability at
the link's current SNR, and collisions are not modelled.
"""

from __future__ import annotations

import csv
import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np

from ..channel import ChannelParams, packet_success_prob
from ..estimators import CompressionPolicy, NnrConfig
from .config import Protocol, SimConfig
from .link import LinkModel
from .model import (
    EnergyModel,
    Node,
    NodeState,
    NeighborRecord,
    Packet,
    PacketKind,
    _reflect,
    energy_charge,
    forwarder_score,
)

METRICS_HEADER = ("protocol", "node_count", "seed", "pdr", "avg_delay_s", "avg_energy_j",
                  "packets_sent", "packets_delivered", "total_energy_j")


@dataclass
class SimMetrics:
    packet_delivery_ratio: float
    avg_end_to_end_delay: float
    avg_energy_per_delivered_packet: float
    packets_sent: int
    packets_delivered: int
    total_energy: float
    counters: dict = field(default_factory=dict, compare=False)

    def row(self, cfg: SimConfig) -> tuple:
        return (cfg.protocol.value, cfg.node_count, cfg.seed, repr(self.packet_delivery_ratio),
                repr(self.avg_end_to_end_delay), repr(self.avg_energy_per_delivered_packet),
                self.packets_sent, self.packets_delivered, repr(self.total_energy))


@dataclass(frozen=True)
class Layout:
    """Explicit placement: ``positions[i]`` is node i; depth is the third coordinate."""

    positions: np.ndarray
    sink_ids: tuple
    source_id: int


def deploy(cfg: SimConfig, rng: np.random.Generator) -> Layout:
    """Sensors uniform in the cube, sinks uniform on the surface, deepest sensor becomes the source."""
    n_sensor = cfg.node_count - cfg.sink_count
    ax, ay, az = cfg.area
    sensors = rng.uniform(0.0, 1.0, size=(n_sensor, 3)) * np.array([ax, ay, az])
    if cfg.sink_layout == "random":
        sinks = np.column_stack((rng.uniform(0.0, ax, cfg.sink_count),
                                 rng.uniform(0.0, ay, cfg.sink_count),
                                 np.zeros(cfg.sink_count)))
    else:
        sinks = spread_points(cfg.sink_count, ax, ay)
    source = int(np.argmax(sensors[:, 2]))
    sensors[source, 2] = az
    positions = np.vstack((sensors, sinks))
    return Layout(positions, tuple(range(n_sensor, cfg.node_count)), source)


def spread_points(count: int, ax: float, ay: float) -> np.ndarray:
    """Evenly spread surface points: rows of cells, each sink at its cell centre."""
    cols = math.ceil(math.sqrt(count))
    rows = math.ceil(count / cols)
    out = []
    for r in range(rows):
        in_row = min(cols, count - r * cols)
        for c in range(in_row):
            out.append(((c + 0.5) / in_row * ax, (r + 0.5) / rows * ay, 0.0))
    return np.array(out)


@dataclass
class _Hop:
    """Progress of one packet through the handshake/data/ack cycle at a relay."""

    packet: Packet
    rounds: int = 0
    candidates: list = field(default_factory=list)
    index: int = 0
    tries: int = 0
    token: int = 0
    collecting: bool = False
    acks: dict = field(default_factory=dict)


class Simulator:
    def __init__(self, cfg: SimConfig, layout: Optional[Layout] = None, record_trace: bool = False):
        self.cfg = cfg
        root = np.random.SeedSequence(cfg.seed)
        deploy_ss, mobility_ss, loss_ss, init_ss = root.spawn(4)
        if layout is None:
            layout = deploy(cfg, np.random.default_rng(deploy_ss))
        self.layout = layout
        self.mobility_rng = np.random.default_rng(mobility_ss)
        self.loss_rng = np.random.default_rng(loss_ss)
        self.init_rng = np.random.default_rng(init_ss)
        self.energy_model = EnergyModel(cfg.bandwidth_bps, cfg.power_send_w, cfg.power_recv_w,
                                        cfg.power_idle_w)
        params = ChannelParams(cfg.tx_power_w, cfg.carrier_khz, cfg.spreading_exponent,
                               cfg.noise_psd, cfg.signal_bandwidth_hz)
        self.links = LinkModel(params, cfg.seed, cfg.duration_s, cfg.fluct_amplitude_db,
                               cfg.fluct_period_s, cfg.fluct_samples_per_period,
                               cfg.fluct_noise_db, cfg.tx_range_R, cfg.fluct_amplitude_spread)
        self.nnr_cfg = NnrConfig(window_m=cfg.nnr_window_m, k=cfg.nnr_k)
        self.policy = CompressionPolicy(storage_limit_L=cfg.storage_limit)
        self.pos = np.array(layout.positions, dtype=np.float64)
        self.sinks = set(layout.sink_ids)
        self.source_id = layout.source_id
        self.nodes = [Node(i, self.pos[i], cfg.energy_initial_j, cfg.energy_initial_j,
                           is_sink=i in self.sinks) for i in range(len(self.pos))]
        self._mobile = np.array([i not in self.sinks for i in range(len(self.pos))])
        self.ctrl_air = self.energy_model.airtime(cfg.control_bytes)
        self.data_air = self.energy_model.airtime(cfg.data_bytes)
        self.max_prop = cfg.tx_range_R / cfg.sound_speed
        self.queue: list = []
        self._counter = 0
        self.now = 0.0
        self.trace: Optional[list] = [] if record_trace else None
        self.energy_by_activity = {"send": 0.0, "receive": 0.0, "idle": 0.0}
        # forwarding state per node
        self._fifo = [deque() for _ in self.nodes]
        self._hop: list[Optional[_Hop]] = [None] * len(self.nodes)
        self._seen = [set() for _ in self.nodes]
        self._dbr_pending = [dict() for _ in self.nodes]
        self._dbr_done = [set() for _ in self.nodes]
        self._tokens = 0
        self.sent = 0
        self.delivered: dict[int, float] = {}
        self.counters = {"data_tx": 0, "handshakes": 0, "acks": 0, "retries": 0, "drops": 0,
                         "hops": 0}

    # -- event queue ---------------------------------------------------------

    def schedule(self, time: float, node_id: int, fn: Callable, *args) -> None:
        self._counter += 1
        heapq.heappush(self.queue, (time, self._counter, node_id, fn, args))

    def run(self) -> SimMetrics:
        cfg = self.cfg
        if cfg.protocol is Protocol.DBR:
            for node in self.nodes:
                node.set_state(NodeState.LISTENING, 0.0)
        else:
            for node in self.nodes:
                start = float(self.init_rng.uniform(0.0, cfg.init_spread_s))
                self.schedule(start, node.id, self.init_process, node.id)
        first = cfg.packet_interval_s
        k = 0
        while first + k * cfg.packet_interval_s < cfg.duration_s:
            self.schedule(first + k * cfg.packet_interval_s, self.source_id, self._generate, k)
            k += 1
        if cfg.mobility_speed > 0:
            self.schedule(cfg.mobility_interval_s, -1, self._move)
        # Packets still in flight at the horizon get a short drain period.
        horizon = cfg.duration_s + 100.0
        while self.queue:
            t, _, node_id, fn, args = heapq.heappop(self.queue)
            if t > horizon:
                break
            self.now = t
            if self.trace is not None:
                self.trace.append((t, node_id, fn.__name__, args))
            fn(t, *args)
        return self._finish()

    def _finish(self) -> SimMetrics:
        cfg = self.cfg
        for node in self.nodes:
            idle = max(0.0, cfg.duration_s - node.busy_time)
            self._charge(node, "idle", idle)
        total = sum(self.energy_by_activity.values())
        n_del = len(self.delivered)
        pdr = n_del / self.sent if self.sent else 0.0
        delay = float(np.mean(list(self.delivered.values()))) if n_del else math.nan
        per_packet = total / n_del if n_del else math.inf
        return SimMetrics(pdr, delay, per_packet, self.sent, n_del, total, dict(self.counters))

    # -- physical layer ------------------------------------------------------

    def _charge(self, node: Node, activity: str, amount: float) -> float:
        taken = energy_charge(node, activity, amount, self.energy_model)
        self.energy_by_activity[activity] += taken
        return taken

    def _in_range(self, sender: int):
        d = np.sqrt(((self.pos - self.pos[sender]) ** 2).sum(axis=1))
        d[sender] = np.inf
        ids = np.flatnonzero(d <= self.cfg.tx_range_R)
        return ids, d[ids]

    def _receive(self, sender: int, receiver: int, t: float, distance: float, nbytes: int,
                 mean_db: Optional[float] = None):
        """Charge the receiver, draw the loss; returns (arrival time, snr_db, success)."""
        node = self.nodes[receiver]
        self._charge(node, "receive", nbytes)
        if mean_db is None:
            mean_db = float(self.links.mean_snr_db(distance))
        snr = mean_db + self.links.fluctuation_db(sender, receiver, t)
        if self.cfg.perfect_channel:
            ok = True
        else:
            lin = 10.0 ** (snr / 10.0)
            ok = self.loss_rng.random() < packet_success_prob(max(lin, 0.0), nbytes * 8)
        airtime = self.energy_model.airtime(nbytes)
        return t + airtime + distance / self.cfg.sound_speed, snr, ok

    def _broadcast(self, sender: int, nbytes: int, t: float, handler: Callable, *args) -> bool:
        node = self.nodes[sender]
        if node.exhausted:
            return False
        self._charge(node, "send", nbytes)
        ids, dists = self._in_range(sender)
        means = self.links.mean_snr_db(dists).tolist()
        for r, d, mean_db in zip(ids.tolist(), dists.tolist(), means):
            arrival, snr, ok = self._receive(sender, r, t, d, nbytes, mean_db)
            if ok:
                self.schedule(arrival, r, handler, r, sender, snr, *args)
        return True

    def _unicast(self, sender: int, receiver: int, nbytes: int, t: float, handler: Callable,
                 *args) -> bool:
        node = self.nodes[sender]
        if node.exhausted:
            return False
        self._charge(node, "send", nbytes)
        d = float(np.linalg.norm(self.pos[receiver] - self.pos[sender]))
        if d > self.cfg.tx_range_R:
            return True
        arrival, snr, ok = self._receive(sender, receiver, t, d, nbytes)
        if ok:
            self.schedule(arrival, receiver, handler, receiver, sender, snr, *args)
        return True

    def _move(self, t: float) -> None:
        cfg = self.cfg
        mobile = np.flatnonzero(self._mobile)
        theta = self.mobility_rng.uniform(0.0, 2 * np.pi, mobile.size)
        step = cfg.mobility_speed * cfg.mobility_interval_s
        self.pos[mobile, 0] = _reflect(self.pos[mobile, 0] + step * np.cos(theta), cfg.area[0])
        self.pos[mobile, 1] = _reflect(self.pos[mobile, 1] + step * np.sin(theta), cfg.area[1])
        for i in mobile.tolist():
            self.nodes[i].position = self.pos[i]
        if t + cfg.mobility_interval_s < cfg.duration_s:
            self.schedule(t + cfg.mobility_interval_s, -1, self._move)

    # -- neighbour bookkeeping ----------------------------------------------

    def _record(self, owner: int, neighbour: int) -> NeighborRecord:
        table = self.nodes[owner].neighbors
        rec = table.get(neighbour)
        if rec is None:
            rec = NeighborRecord(neighbour, self.nnr_cfg, self.policy, self.cfg.ema_alpha)
            table[neighbour] = rec
        return rec

    def _observe(self, owner: int, sender: int, t: float, snr: float) -> NeighborRecord:
        s = self.nodes[sender]
        rec = self._record(owner, sender)
        rec.observe(t, snr, s.depth, s.energy_ratio)
        return rec

    # -- initialization ------------------------------------------------------

    def init_process(self, t: float, node_id: int) -> None:
        """Announce this node; every receiver answers with an Ack carrying its id, depth and energy."""
        self.counters["handshakes"] += 1
        self._broadcast(node_id, self.cfg.control_bytes, t, self._init_heard)
        wait = 2 * (self.ctrl_air + self.max_prop) + self.cfg.guard_s
        self.schedule(t + wait, node_id, self._init_done, node_id)

    def _init_heard(self, t: float, me: int, sender: int, snr: float) -> None:
        self._observe(me, sender, t, snr)
        self.counters["acks"] += 1
        self._unicast(me, sender, self.cfg.control_bytes, t, self._init_ack)

    def _init_ack(self, t: float, me: int, sender: int, snr: float) -> None:
        self._observe(me, sender, t, snr)

    def _init_done(self, t: float, node_id: int) -> None:
        self.nodes[node_id].set_state(NodeState.LISTENING, t)

    # -- traffic -------------------------------------------------------------

    def _generate(self, t: float, seq: int) -> None:
        self.sent += 1
        pkt = Packet(PacketKind.DATA, self.source_id, self.source_id, seq, t,
                     payload_bytes=self.cfg.data_bytes)
        src = self.source_id
        self._seen[src].add(seq)
        if self.cfg.protocol is Protocol.DBR:
            self._dbr_send(t, src, pkt)
        else:
            self._enqueue(t, src, pkt)

    def _deliver(self, t: float, pkt: Packet) -> None:
        if pkt.sequence not in self.delivered:
            self.delivered[pkt.sequence] = t - pkt.birth_time
            self.counters["hops"] += pkt.hop_count

    # -- handshake-based forwarding (DBCAR and CARP-like) --------------------

    def _enqueue(self, t: float, node_id: int, pkt: Packet) -> None:
        self._fifo[node_id].append(pkt)
        if self._hop[node_id] is None:
            self._next_packet(t, node_id)

    def _next_packet(self, t: float, node_id: int) -> None:
        node = self.nodes[node_id]
        fifo = self._fifo[node_id]
        if not fifo:
            self._hop[node_id] = None
            node.set_state(NodeState.LISTENING, t)
            return
        node.set_state(NodeState.FORWARDING, t)
        self._hop[node_id] = _Hop(fifo.popleft())
        self._handshake(t, node_id)

    def _drop(self, t: float, node_id: int) -> None:
        self.counters["drops"] += 1
        self._next_packet(t, node_id)

    def _handshake(self, t: float, node_id: int) -> None:
        hop = self._hop[node_id]
        hop.acks = {}
        hop.collecting = True
        hop.rounds += 1
        self.counters["handshakes"] += 1
        if not self._broadcast(node_id, self.cfg.control_bytes, t, self._handshake_heard,
                               self.nodes[node_id].depth):
            self._drop(t, node_id)
            return
        wait = 2 * (self.ctrl_air + self.max_prop) + self.cfg.guard_s
        self._tokens += 1
        hop.token = self._tokens
        self.schedule(t + wait, node_id, self._select, node_id, hop.token)

    def _handshake_heard(self, t: float, me: int, sender: int, snr: float, sender_depth: float) -> None:
        self.listening_process(t, me, sender, snr, None)
        # Only nodes that would make upward progress answer.
        if self.nodes[me].depth < sender_depth:
            self.counters["acks"] += 1
            self._unicast(me, sender, self.cfg.control_bytes, t, self._ack_heard)

    def _ack_heard(self, t: float, me: int, sender: int, snr: float) -> None:
        self._observe(me, sender, t, snr)
        hop = self._hop[me]
        if hop is not None and hop.collecting:
            hop.acks[sender] = self.nodes[sender].depth

    def _select(self, t: float, node_id: int, token: int) -> None:
        hop = self._hop[node_id]
        if hop is None or hop.token != token:
            return
        hop.collecting = False
        ranked = self.rank_candidates(node_id, hop.acks)
        if not ranked:
            if hop.rounds > self.cfg.retry_limit:
                self._drop(t, node_id)
            else:
                self.schedule(t + self.cfg.retry_backoff_s, node_id, self._retry_handshake,
                              node_id, token)
            return
        hop.candidates = ranked[:2]
        hop.index = 0
        hop.tries = 0
        self._send_data(t, node_id)

    def _retry_handshake(self, t: float, node_id: int, token: int) -> None:
        hop = self._hop[node_id]
        if hop is not None and hop.token == token:
            self._handshake(t, node_id)

    def rank_candidates(self, node_id: int, responders: dict) -> list[int]:
        """Eligible responders, best first. Sinks outrank everything."""
        me = self.nodes[node_id]
        eligible = {c: me.depth - d for c, d in responders.items() if me.depth - d > 0}
        if not eligible:
            return []
        sinks = sorted(c for c in eligible if self.nodes[c].is_sink)
        if sinks:
            return sinks
        scored = []
        for c, dd in eligible.items():
            rec = me.neighbors[c]
            if self.cfg.protocol is Protocol.CARP_LIKE:
                score = carp_like_score(rec, dd)
            else:
                score = dbcar_score(rec, dd, self.cfg.gradient_alpha)
            scored.append((-score, c))
        scored.sort()
        return [c for _, c in scored]

    def _send_data(self, t: float, node_id: int) -> None:
        hop = self._hop[node_id]
        target = hop.candidates[hop.index]
        hop.tries += 1
        if hop.tries > 1:
            self.counters["retries"] += 1
        pkt = hop.packet
        out = Packet(PacketKind.DATA, pkt.source_id, node_id, pkt.sequence, pkt.birth_time,
                     designated_forwarder_id=target, hop_count=pkt.hop_count + 1,
                     payload_bytes=pkt.payload_bytes, sender_depth=self.nodes[node_id].depth)
        self.counters["data_tx"] += 1
        if not self._broadcast(node_id, out.payload_bytes, t, self._data_heard, out):
            self._drop(t, node_id)
            return
        self._tokens += 1
        hop.token = self._tokens
        wait = self.data_air + self.ctrl_air + 2 * self.max_prop + self.cfg.guard_s
        self.schedule(t + wait, node_id, self._data_timeout, node_id, hop.token)

    def _data_heard(self, t: float, me: int, sender: int, snr: float, pkt: Packet) -> None:
        self.listening_process(t, me, sender, snr, pkt)

    def listening_process(self, t: float, me: int, sender: int, snr: float,
                          pkt: Optional[Packet]) -> None:
        """Record the sender's SNR; take over the packet when this node is its designated forwarder."""
        node = self.nodes[me]
        self._observe(me, sender, t, snr)
        if pkt is None or pkt.designated_forwarder_id != me:
            return
        self.counters["acks"] += 1
        self._unicast(me, sender, self.cfg.control_bytes, t, self._data_acked, pkt.sequence)
        if node.is_sink:
            self._deliver(t, pkt)
            return
        if pkt.sequence in self._seen[me] or pkt.hop_count >= self.cfg.ttl:
            return
        if node.state is NodeState.INITIALIZATION:
            return
        self._seen[me].add(pkt.sequence)
        self._enqueue(t, me, pkt)

    def _data_acked(self, t: float, me: int, sender: int, snr: float, seq: int) -> None:
        self._observe(me, sender, t, snr)
        hop = self._hop[me]
        if hop is None or hop.packet.sequence != seq or hop.collecting or not hop.candidates:
            return
        if hop.candidates[hop.index] != sender:
            return
        self._tokens += 1
        self._next_packet(t, me)

    def _data_timeout(self, t: float, node_id: int, token: int) -> None:
        hop = self._hop[node_id]
        if hop is None or hop.token != token:
            return
        if hop.tries <= self.cfg.retry_limit:
            self._send_data(t, node_id)
        elif hop.index + 1 < len(hop.candidates):
            hop.index += 1
            hop.tries = 0
            self._send_data(t, node_id)
        else:
            self._drop(t, node_id)

    # -- DBR -----------------------------------------------------------------

    def _dbr_send(self, t: float, node_id: int, pkt: Packet) -> None:
        out = Packet(PacketKind.DATA, pkt.source_id, node_id, pkt.sequence, pkt.birth_time,
                     hop_count=pkt.hop_count + 1 if node_id != pkt.source_id else 0,
                     payload_bytes=pkt.payload_bytes, sender_depth=self.nodes[node_id].depth)
        self.counters["data_tx"] += 1
        self._broadcast(node_id, out.payload_bytes, t, self.dbr_forwarding, out)

    def holding_time(self, delta_d: float) -> float:
        tau = self.cfg.tx_range_R / self.cfg.sound_speed
        return 2 * tau / self.cfg.depth_threshold * (self.cfg.tx_range_R - delta_d) \
            if self.cfg.depth_threshold > 0 else 0.0

    def dbr_forwarding(self, t: float, me: int, sender: int, snr: float, pkt: Packet) -> None:
        node = self.nodes[me]
        seq = pkt.sequence
        if node.is_sink:
            self._deliver(t, pkt)
            return
        if seq in self._dbr_done[me]:
            return
        pending = self._dbr_pending[me]
        if seq in pending:
            # Someone else already relayed this packet.
            del pending[seq]
            self._dbr_done[me].add(seq)
            if not pending:
                node.set_state(NodeState.LISTENING, t)
            return
        delta_d = pkt.sender_depth - node.depth
        if delta_d <= self.cfg.depth_threshold or pkt.hop_count + 1 >= self.cfg.ttl:
            return
        self._tokens += 1
        pending[seq] = (self._tokens, pkt)
        node.set_state(NodeState.FORWARDING, t)
        self.schedule(t + self.holding_time(delta_d), me, self._dbr_release, me, seq, self._tokens)

    def _dbr_release(self, t: float, me: int, seq: int, token: int) -> None:
        pending = self._dbr_pending[me]
        entry = pending.get(seq)
        if entry is None or entry[0] != token:
            return
        del pending[seq]
        self._dbr_done[me].add(seq)
        self._dbr_send(t, me, entry[1])
        if not pending:
            self.nodes[me].set_state(NodeState.LISTENING, t)


def dbcar_score(rec: NeighborRecord, delta_d: float, alpha: float) -> float:
    return forwarder_score(rec.predicted_snr(), rec.gradient(), delta_d, rec.stats.mean,
                           rec.variance(), rec.last_residual_energy_ratio, alpha)


def carp_like_score(rec: NeighborRecord, delta_d: float) -> float:
    return rec.ema.s * delta_d


def select_forwarder(candidates: dict, alpha: float, sinks=()) -> Optional[int]:
    """Best candidate from ``{id: (record, delta_d)}``; sinks win, ties go to the lower id."""
    return _argmax(candidates, sinks, lambda rec, dd: dbcar_score(rec, dd, alpha))


def carp_like_select(candidates: dict, sinks=()) -> Optional[int]:
    return _argmax(candidates, sinks, carp_like_score)


def _argmax(candidates: dict, sinks, score) -> Optional[int]:
    eligible = {c: v for c, v in candidates.items() if v[1] > 0}
    if not eligible:
        return None
    in_range = sorted(c for c in eligible if c in set(sinks))
    if in_range:
        return in_range[0]
    return min(eligible, key=lambda c: (-score(*eligible[c]), c))


def run_sim(cfg: SimConfig, layout: Optional[Layout] = None) -> SimMetrics:
    return Simulator(cfg, layout).run()


def write_metrics_csv(rows: Iterable[tuple], path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for row in rows:
            w.writerow(row)
