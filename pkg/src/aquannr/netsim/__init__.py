"""Discrete-event routing simulator for underwater acoustic sensor fields."""

from .config import Protocol, SimConfig
from .engine import (
    METRICS_HEADER,
    Layout,
    SimMetrics,
    Simulator,
    carp_like_score,
    carp_like_select,
    dbcar_score,
    deploy,
    run_sim,
    select_forwarder,
    write_metrics_csv,
)
from .link import LinkModel, link_seed, link_snr_at
from .model import (
    LEGAL_TRANSITIONS,
    VARIANCE_FLOOR,
    EnergyModel,
    NeighborRecord,
    Node,
    NodeState,
    Packet,
    PacketKind,
    adjusted_snr,
    energy_charge,
    forwarder_score,
    mobility_step,
    sgn,
)

__all__ = [
    "LEGAL_TRANSITIONS", "METRICS_HEADER", "VARIANCE_FLOOR", "EnergyModel", "Layout", "LinkModel",
    "NeighborRecord", "Node", "NodeState", "Packet", "PacketKind", "Protocol", "SimConfig",
    "SimMetrics", "Simulator", "adjusted_snr", "carp_like_score", "carp_like_select",
    "dbcar_score", "deploy", "energy_charge", "forwarder_score", "link_seed", "link_snr_at",
    "mobility_step", "run_sim", "select_forwarder", "sgn", "write_metrics_csv",
]
