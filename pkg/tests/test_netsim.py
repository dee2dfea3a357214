import heapq
import math

import numpy as np
import pytest

from aquannr.channel import ChannelParams, packet_success_prob, snr_db
from aquannr.errors import ConfigError, DomainError, NoLinkError
from aquannr.netsim import (
    LEGAL_TRANSITIONS,
    EnergyModel,
    Layout,
    LinkModel,
    NeighborRecord,
    Node,
    NodeState,
    Protocol,
    SimConfig,
    Simulator,
    adjusted_snr,
    carp_like_select,
    energy_charge,
    forwarder_score,
    link_snr_at,
    mobility_step,
    run_sim,
    select_forwarder,
)
from aquannr.netsim.config import format_value, parse_value
from aquannr.netsim.engine import deploy, spread_points

QUIET = dict(mobility_speed=0.0, perfect_channel=True, duration_s=100.0)


def small_cfg(**kw):
    base = dict(area=(500.0, 500.0, 500.0), node_count=3, sink_count=1, **QUIET)
    base.update(kw)
    return SimConfig(**base)


def column_layout(depths, sink_ids, source_id):
    pos = np.array([[100.0, 100.0, d] for d in depths])
    return Layout(pos, tuple(sink_ids), source_id)


# -- scoring ------------------------------------------------------------------------

def test_forwarder_score_example():
    assert forwarder_score(s=5, g=1, delta_d=10, m=1, v=1, E=1, alpha=0.2) == pytest.approx(60.0)


def test_adjusted_snr_ignores_flat_gradient():
    assert adjusted_snr(7.0, 0.0, 0.3) == 7.0
    assert adjusted_snr(10.0, -2.0, 0.1) == 9.0


def test_forwarder_score_domain():
    with pytest.raises(DomainError):
        forwarder_score(5, 0, 10, 1, -1, 1, 0.1)
    with pytest.raises(DomainError):
        forwarder_score(5, 0, 10, 1, 1, 1.5, 0.1)
    with pytest.raises(DomainError):
        forwarder_score(5, 0, 0, 1, 1, 1, 0.1)
    # zero variance is floored, not infinite
    assert math.isfinite(forwarder_score(5, 0, 10, 1, 0, 1, 0.1))


def test_score_monotone_directions():
    base = dict(s=8.0, g=0.0, delta_d=40.0, m=9.0, v=2.0, E=0.7, alpha=0.15)
    ref = forwarder_score(**base)
    for key in ("s", "delta_d", "m", "E"):
        bumped = dict(base, **{key: base[key] * 1.1 if key != "E" else 0.8})
        assert forwarder_score(**bumped) > ref
    assert forwarder_score(**dict(base, v=3.0)) < ref


def _record(samples, energy=1.0, alpha=0.2):
    rec = NeighborRecord(1, ema_alpha=alpha)
    for i, v in enumerate(samples):
        rec.observe(float(i), v, 10.0, energy)
    return rec


def test_select_forwarder_cases():
    rec = _record([10.0, 11.0, 10.5])
    assert select_forwarder({4: (rec, 10.0)}, 0.15) == 4
    a, b = _record([10.0, 11.0, 10.5]), _record([10.0, 11.0, 10.5])
    assert select_forwarder({1: (a, 10.0), 2: (b, 20.0)}, 0.15) == 2
    assert select_forwarder({7: (a, 10.0), 3: (b, 10.0)}, 0.15) == 3
    assert select_forwarder({1: (a, 10.0), 9: (b, 5.0)}, 0.15, sinks=(9,)) == 9
    assert select_forwarder({1: (a, -5.0)}, 0.15) is None


def test_energy_scale_leaves_argmax():
    recs = {1: _record([9, 10, 11, 10], 0.9), 2: _record([12, 12.5, 12, 12.2], 0.8),
            3: _record([5, 15, 5, 15], 0.5)}
    dd = {1: 30.0, 2: 25.0, 3: 60.0}
    pick = select_forwarder({c: (r, dd[c]) for c, r in recs.items()}, 0.15)
    for r in recs.values():
        r.last_residual_energy_ratio *= 0.5
    assert select_forwarder({c: (r, dd[c]) for c, r in recs.items()}, 0.15) == pick


def test_carp_like_example():
    a = _record([10.0], alpha=1.0)
    b = _record([4.0], alpha=1.0)
    assert carp_like_select({1: (a, 10.0), 2: (b, 20.0)}) == 1


def test_carp_ignores_variance_dbcar_does_not():
    steady = _record([10.0, 10.1, 9.9, 10.0, 10.0], alpha=0.2)
    shaky = _record([0.0, 20.0, 0.0, 20.0, 10.0], alpha=0.2)
    # Same EMA-ish level; the shaky one has more depth gain.
    cands = {1: (steady, 20.0), 2: (shaky, 30.0)}
    s_steady, s_shaky = steady.ema.s * 20.0, shaky.ema.s * 30.0
    assert carp_like_select(cands) == (2 if s_shaky > s_steady else 1) == 2
    assert select_forwarder(cands, 0.15) == 1


def test_record_stats_match_two_pass():
    samples = [11.0, 12.5, 9.0, 10.0, 13.0]
    rec = _record(samples)
    assert rec.stats.mean == pytest.approx(np.mean(samples), rel=1e-12)
    assert rec.variance() == pytest.approx(np.var(samples, ddof=1), rel=1e-12)
    assert rec.gradient() == 3.0


# -- node, energy, mobility ---------------------------------------------------------

def test_state_machine_legality():
    n = Node(0, np.zeros(3), 10.0, 10.0)
    with pytest.raises(RuntimeError):
        n.set_state(NodeState.FORWARDING, 0.0)
    n.set_state(NodeState.LISTENING, 0.0)
    n.set_state(NodeState.FORWARDING, 1.0)
    n.set_state(NodeState.LISTENING, 2.0)
    with pytest.raises(RuntimeError):
        n.set_state(NodeState.INITIALIZATION, 3.0)
    assert len(LEGAL_TRANSITIONS) == 3


def test_energy_examples():
    m = EnergyModel()
    assert m.cost("send", 100) == pytest.approx(0.16)
    assert m.cost("receive", 20) == pytest.approx(0.0016)
    assert m.cost("idle", 1e4) == pytest.approx(100.0)


def test_energy_clamps_at_zero():
    n = Node(0, np.zeros(3), 0.1, 0.1)
    assert energy_charge(n, "send", 100) == pytest.approx(0.1)
    assert n.energy_residual == 0.0 and n.exhausted


def test_mobility_invariants(rng):
    area = (500.0, 500.0, 500.0)
    p0 = np.array([10.0, 490.0, 123.0])
    assert np.array_equal(mobility_step(p0, 10, 0.0, area, rng), p0)
    assert np.array_equal(mobility_step(p0, 10, 0.5, area, rng, is_sink=True), p0)
    p = p0
    for _ in range(1000):
        p = mobility_step(p, 10.0, 5.0, area, rng)
        assert 0 <= p[0] <= 500 and 0 <= p[1] <= 500
        assert p[2] == 123.0


# -- link model ---------------------------------------------------------------------

def _links(amplitude=5.0, noise=0.5, seed=3):
    return LinkModel(ChannelParams(), seed, 2000.0, amplitude, 600.0, 24, noise, 150.0)


def test_link_zero_fluctuation_matches_budget():
    lm = _links(amplitude=0.0, noise=0.0)
    assert lm.snr_db(1, 2, 37.0, 120.0) == pytest.approx(snr_db(120.0, ChannelParams()), abs=1e-9)


def test_link_determinism_and_symmetry():
    a, b = _links(), _links()
    assert a.snr_db(3, 8, 123.4, 90.0) == b.snr_db(8, 3, 123.4, 90.0)


def test_link_period_average_near_mean():
    lm = _links(noise=0.2)
    t = np.linspace(0, 600, 6001)
    avg = np.mean([lm.fluctuation_db(1, 2, x) for x in t])
    assert abs(avg) < 0.3


def test_link_out_of_range():
    with pytest.raises(NoLinkError):
        link_snr_at(_links(), 1, 2, 0.0, 151.0)


# -- config ---------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ConfigError):
        SimConfig(node_count=1)
    with pytest.raises(ConfigError):
        SimConfig(gradient_alpha=0.5)
    with pytest.raises(ConfigError):
        SimConfig(node_count=3, sink_count=3)
    with pytest.raises(ConfigError):
        SimConfig.from_mapping({"no_such_key": "1"})
    assert SimConfig().depth_threshold == 37.5
    assert SimConfig().packet_interval_s == 10.0


def test_config_roundtrip():
    cfg = SimConfig(protocol=Protocol.CARP_LIKE, dbr_delta=20.0, area=(100.0, 200.0, 300.0))
    again = SimConfig.from_mapping(dict(cfg.to_pairs()))
    assert again == cfg
    assert Protocol.parse("carp") is Protocol.CARP_LIKE
    assert format_value(None) == "none"
    assert parse_value("dbr_delta", "none", 1.0) is None


def test_spread_sinks():
    pts = spread_points(3, 500, 500)
    assert pts.tolist() == [[125.0, 125.0, 0.0], [375.0, 125.0, 0.0], [250.0, 375.0, 0.0]]


def test_deploy_source_and_sinks():
    cfg = SimConfig(node_count=50, sink_count=3)
    lay = deploy(cfg, np.random.default_rng(0))
    assert lay.positions.shape == (50, 3)
    assert lay.sink_ids == (47, 48, 49)
    assert np.all(lay.positions[list(lay.sink_ids), 2] == 0)
    assert lay.positions[lay.source_id, 2] == 500.0


# -- end to end -------------------------------------------------------------------

@pytest.mark.parametrize("protocol", list(Protocol))
def test_two_nodes_perfect_channel(protocol):
    cfg = SimConfig(area=(80.0, 80.0, 80.0), node_count=2, sink_count=1, protocol=protocol, **QUIET)
    m = run_sim(cfg)
    assert m.packets_sent == 9
    assert m.packet_delivery_ratio == 1.0


@pytest.mark.parametrize("protocol", list(Protocol))
def test_disconnected_source(protocol):
    cfg = small_cfg(node_count=2, protocol=protocol)
    lay = column_layout([400.0, 0.0], [1], 0)
    m = run_sim(cfg, lay)
    assert m.packets_sent > 0 and m.packet_delivery_ratio == 0.0


def test_dbr_chain_delay():
    cfg = small_cfg(protocol=Protocol.DBR)
    lay = column_layout([200.0, 100.0, 0.0], [2], 0)
    m = run_sim(cfg, lay)
    tau = 150.0 / 1500.0
    hold = 2 * tau / 37.5 * (150.0 - 100.0)
    expect = 2 * (0.08 + 100.0 / 1500.0) + hold
    assert m.packet_delivery_ratio == 1.0
    assert m.avg_end_to_end_delay == pytest.approx(expect, abs=1e-9)


def test_dbr_equal_depths_do_not_forward():
    cfg = small_cfg(node_count=4, protocol=Protocol.DBR)
    pos = np.array([[100.0, 100.0, 200.0], [60.0, 100.0, 180.0], [140.0, 100.0, 180.0],
                    [100.0, 100.0, 0.0]])
    sim = Simulator(cfg, Layout(pos, (3,), 0))
    m = sim.run()
    assert m.packet_delivery_ratio == 0.0
    assert sim.counters["data_tx"] == m.packets_sent


def test_dbr_suppression():
    cfg = small_cfg(node_count=4, protocol=Protocol.DBR)
    # Two relays at different depths; the deeper one hears the shallower one relay first.
    pos = np.array([[100.0, 100.0, 230.0], [100.0, 100.0, 110.0], [120.0, 100.0, 150.0],
                    [100.0, 100.0, 0.0]])
    sim = Simulator(cfg, Layout(pos, (3,), 0))
    m = sim.run()
    assert m.packet_delivery_ratio == 1.0
    assert sim.counters["data_tx"] == 2 * m.packets_sent


def test_handshake_chain_delivers():
    for proto in (Protocol.DBCAR, Protocol.CARP_LIKE):
        cfg = small_cfg(protocol=proto)
        m = run_sim(cfg, column_layout([200.0, 100.0, 0.0], [2], 0))
        assert m.packet_delivery_ratio == 1.0
        # two hops, each with a handshake round, data airtime and propagation
        assert m.avg_end_to_end_delay > 2 * (0.08 + 100 / 1500)


def test_run_is_deterministic():
    cfg = SimConfig(node_count=40, duration_s=400.0, seed=5)
    a, b = Simulator(cfg, record_trace=True), Simulator(cfg, record_trace=True)
    ma, mb = a.run(), b.run()
    assert ma == mb
    assert [e[:3] for e in a.trace] == [e[:3] for e in b.trace]


@pytest.mark.parametrize("protocol", list(Protocol))
def test_run_invariants(protocol):
    cfg = SimConfig(node_count=60, duration_s=600.0, seed=2, protocol=protocol)
    sim = Simulator(cfg)
    m = sim.run()
    assert 0 <= m.packet_delivery_ratio <= 1
    assert m.packets_delivered <= m.packets_sent
    assert m.total_energy == pytest.approx(sum(sim.energy_by_activity.values()))
    spent = sum(n.energy_initial - n.energy_residual for n in sim.nodes)
    assert m.total_energy == pytest.approx(spent, rel=1e-9)
    src = sim.layout.positions[sim.source_id]
    for seq, delay in sim.delivered.items():
        assert delay > 0
        nearest_sink = min(np.linalg.norm(sim.layout.positions[s] - src) for s in sim.sinks)
        # the source moves horizontally, so allow for drift since deployment
        assert delay >= (nearest_sink - cfg.mobility_speed * cfg.duration_s) / cfg.sound_speed
    for node in sim.nodes:
        for _, old, new in node.transitions:
            assert (old, new) in LEGAL_TRANSITIONS
        for rec in node.neighbors.values():
            vals = rec.snr_series.values
            if rec.stats.count_i >= 2 and len(vals) == rec.stats.count_i:
                assert rec.stats.mean == pytest.approx(vals.mean(), rel=1e-9, abs=1e-9)
                assert rec.variance() == pytest.approx(vals.var(ddof=1), rel=1e-7, abs=1e-9)


# -- init process ---------------------------------------------------------------------

def _drain(sim):
    while sim.queue:
        t, _, _, fn, args = heapq.heappop(sim.queue)
        fn(t, *args)


def test_init_isolated_node():
    cfg = small_cfg(node_count=2)
    sim = Simulator(cfg, column_layout([400.0, 0.0], [1], 0))
    sim.init_process(0.0, 0)
    _drain(sim)
    assert sim.nodes[0].neighbors == {}
    assert sim.nodes[0].state is NodeState.LISTENING


def test_init_three_neighbours_lossless():
    cfg = small_cfg(node_count=4)
    pos = np.array([[100.0, 100.0, 100.0], [150.0, 100.0, 100.0], [100.0, 150.0, 100.0],
                    [100.0, 100.0, 50.0]])
    sim = Simulator(cfg, Layout(pos, (3,), 0))
    sim.init_process(0.0, 0)
    _drain(sim)
    table = sim.nodes[0].neighbors
    assert sorted(table) == [1, 2, 3]
    assert all(len(r.snr_series) == 1 for r in table.values())
    assert sim.nodes[0].state is NodeState.LISTENING


def test_init_lossy_links_follow_draws():
    cfg = small_cfg(node_count=4, perfect_channel=False, noise_psd=3e-8, seed=1)
    pos = np.array([[100.0, 100.0, 100.0], [240.0, 100.0, 100.0], [100.0, 240.0, 100.0],
                    [100.0, 100.0, 0.0]])
    sim = Simulator(cfg, Layout(pos, (3,), 0))
    sim.init_process(0.0, 0)
    _drain(sim)
    # Replay the same draws by hand: broadcast to 1, 2, 3, then one Ack per survivor.
    replay = Simulator(cfg, Layout(pos, (3,), 0))
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(4)[2])
    heard = []
    for r in (1, 2, 3):
        d = float(np.linalg.norm(pos[r] - pos[0]))
        snr = replay.links.snr_db(0, r, 0.0, d)
        if rng.random() < packet_success_prob(10 ** (snr / 10), 160):
            heard.append((r, d, 0.0 + 0.016 + d / 1500))
    expect = []
    for r, d, t in sorted(heard, key=lambda x: x[2]):
        snr = replay.links.snr_db(r, 0, t, d)
        if rng.random() < packet_success_prob(10 ** (snr / 10), 160):
            expect.append(r)
    assert sorted(sim.nodes[0].neighbors) == sorted(expect)
    assert 0 < len(expect) < 3
