from types import SimpleNamespace

import pytest
from hypothesis import given, settings, strategies as st

from mmwtcp import mptcp, tcp
from mmwtcp.bearer import DelayLine, FixedRateHop
from mmwtcp.config import MptcpConfig, TcpConfig
from mmwtcp.engine import Simulator
from mmwtcp.mptcp import (Subflow, MetaReceiver, MptcpConnection, CoupledCC,
                          scheduler_pick)
from mmwtcp.tcp import TcpSender, TcpReceiver, ByteStream, NewReno, Cubic
from mmwtcp.utils import ms, seconds


def test_lia_single_subflow_is_reno():
    assert mptcp.lia_increase([10.0], [0.1], 0) == pytest.approx(0.1)


def test_lia_symmetric():
    inc = mptcp.lia_increase([10.0, 10.0], [0.1, 0.1], 0)
    assert inc == pytest.approx(0.025, abs=1e-12)


def test_lia_clamped_by_reno():
    windows = [1.0, 100.0]
    rtts = [0.01, 1.0]
    assert mptcp.lia_increase(windows, rtts, 0) == pytest.approx(0.25)
    assert mptcp.lia_increase(windows, rtts, 1) == pytest.approx(0.01)


def test_olia_symmetric():
    assert mptcp.olia_alphas([10.0, 10.0], [0.1, 0.1], [5e5, 5e5]) == \
        [0.0, 0.0]
    inc = mptcp.olia_increase([10.0, 10.0], [0.1, 0.1], [5e5, 5e5], 0)
    assert inc == pytest.approx(0.025, abs=1e-12)


def test_olia_single_subflow_is_reno():
    assert mptcp.olia_increase([8.0], [0.05], [1e5], 0) == \
        pytest.approx(1 / 8.0)


def test_olia_alphas_sum_to_zero():
    alphas = mptcp.olia_alphas([10.0, 20.0], [0.05, 0.1], [1000, 1000])
    assert alphas == pytest.approx([0.5, -0.5])
    alphas = mptcp.olia_alphas([10.0, 20.0, 5.0], [0.05, 0.1, 0.05],
                               [1000, 1000, 1000])
    assert sum(alphas) == pytest.approx(0.0)
    assert alphas[1] < 0


def test_balia_symmetric():
    inc = mptcp.balia_increase([10.0, 10.0], [0.1, 0.1], 0)
    assert inc == pytest.approx(0.025, abs=1e-12)
    assert mptcp.balia_decrease([10.0, 10.0], [0.1, 0.1], 0) == \
        pytest.approx(5.0)


def test_balia_single_subflow_is_reno():
    assert mptcp.balia_increase([10.0], [0.1], 0) == pytest.approx(0.1)
    assert mptcp.balia_decrease([10.0], [0.1], 0) == pytest.approx(5.0)


def test_balia_decrease_clamped():
    assert mptcp.balia_decrease([10.0, 100.0], [0.1, 0.1], 0) == \
        pytest.approx(2.5)


def fake_subflow(sid, srtt, room=True, retx=False, started=True):
    sender = SimpleNamespace(
        est=SimpleNamespace(srtt=srtt, rto=1.0),
        conn=SimpleNamespace(cwnd_mss=10.0),
        has_room=lambda: room,
        pending_retransmission=lambda: retx)
    sf = Subflow(sid, 'p{}'.format(sid), sender, None)
    sf.started = started
    return sf


def test_scheduler_min_rtt():
    flows = [fake_subflow(0, 0.05), fake_subflow(1, 0.01)]
    assert scheduler_pick(flows) is flows[1]


def test_scheduler_skips_full_window():
    flows = [fake_subflow(0, 0.01, room=False), fake_subflow(1, 0.05)]
    assert scheduler_pick(flows) is flows[1]


def test_scheduler_tie_goes_to_first():
    flows = [fake_subflow(0, 0.02), fake_subflow(1, 0.02)]
    assert scheduler_pick(flows) is flows[0]


def test_scheduler_unknown_rtt_ranks_last():
    flows = [fake_subflow(0, None), fake_subflow(1, 0.3)]
    assert scheduler_pick(flows) is flows[1]
    assert scheduler_pick([fake_subflow(0, None)]).id == 0


def test_scheduler_none_available():
    flows = [fake_subflow(0, 0.01, room=False),
             fake_subflow(1, 0.01, started=False),
             fake_subflow(2, 0.01, retx=True)]
    assert scheduler_pick(flows) is None


def test_meta_waits_for_gap():
    got = []
    rx = MetaReceiver(got.extend)
    rx.push([(1400, 1400, 1)])
    assert got == []
    rx.push([(0, 1400, 0)])
    assert got == [(0, 1400, 0), (1400, 1400, 1)]


def test_meta_discards_duplicates():
    got = []
    rx = MetaReceiver(got.extend)
    rx.push([(0, 1400, 0)])
    rx.push([(0, 1400, 1)])
    assert got == [(0, 1400, 0)]
    assert rx.duplicates == 1
    assert mptcp.meta_reassemble(rx, [(1400, 100, 1)]) == 1500


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 399), max_size=80).flatmap(
    lambda extra: st.tuples(
        st.permutations(list(range(400)) + extra),
        st.lists(st.integers(0, 1), min_size=400, max_size=400))))
def test_meta_exactly_once_any_striping(case):
    arrivals, flows = case
    got = []
    rx = MetaReceiver(got.extend)
    for i in arrivals:
        rx.push([(i * 1400, 1400, flows[i])])
    assert [c[0] for c in got] == [i * 1400 for i in range(400)]
    assert sum(c[1] for c in got) == 400 * 1400


def build_connection(cc='lia', size=300000, delays=(5, 20)):
    sim = Simulator(1)
    got = []
    tcp_cfg = TcpConfig()
    meta = MptcpConnection(sim, MptcpConfig(enabled=True, cc=cc,
                                            second_path='lte'),
                           tcp_cfg, ByteStream(size), got.extend)
    for flow, delay in enumerate(delays):
        sender = TcpSender(sim, NewReno(), tcp_cfg, flow, None,
                           label='sf{}'.format(flow))
        receiver = TcpReceiver(sim, tcp_cfg, flow, None, None)
        sender.route = (DelayLine(sim, ms(delay)), receiver)
        receiver.ack_route = (DelayLine(sim, ms(delay)), sender)
        meta.add_subflow('path{}'.format(flow), sender, receiver)
    return sim, meta, got


def test_add_subflow_wires_controllers():
    _, meta, _ = build_connection(cc='balia')
    assert all(isinstance(sf.sender.cc, CoupledCC) for sf in meta.subflows)
    assert all(sf.sender.source is None for sf in meta.subflows)
    _, meta, _ = build_connection(cc='cubic')
    assert all(isinstance(sf.sender.cc, Cubic) for sf in meta.subflows)


def test_coupled_cc_rejects_unknown_kind():
    with pytest.raises(ValueError):
        CoupledCC('reno', None, None)


@pytest.mark.parametrize("cc", ['cubic', 'lia', 'olia', 'balia'])
def test_transfer_over_two_subflows(cc):
    sim, meta, got = build_connection(cc)
    for sf in meta.subflows:
        meta.start_subflow(sf)
    sim.run(seconds(5))
    assert [c[0] for c in got] == sorted(c[0] for c in got)
    assert sum(c[1] for c in got) == 300000
    assert {c[2] for c in got} == {0, 1}


def test_second_subflow_starts_late():
    sim, meta, got = build_connection()
    first, second = meta.subflows
    meta.start_subflow(first)
    sim.schedule(ms(500), meta.start_subflow, second)
    sim.run(ms(499))
    assert second.sender.sent == 0
    sim.run(seconds(5))
    assert sum(c[1] for c in got) == 300000


def test_path_failure_reinjects_data():
    sim, meta, got = build_connection()
    for sf in meta.subflows:
        meta.start_subflow(sf)
    sim.run(ms(1))
    slow = meta.subflows[1]
    assert slow.sender.unacked_chunks()
    meta.on_path_failed('path1')
    assert not slow.alive and slow.sender.closed
    sent_before = slow.sender.sent
    sim.run(seconds(5))
    assert slow.sender.sent == sent_before
    assert [c[0] for c in got] == sorted(c[0] for c in got)
    assert sum(c[1] for c in got) == 300000


def test_loss_marks_inter_loss_interval():
    sf = Subflow(0, 'p', SimpleNamespace(bytes_sent=5000), None)
    assert sf.inter_loss == 5000
    sf.mark_loss()
    assert sf.loss_interval == 5000
    sf.sender.bytes_sent = 6000
    assert sf.inter_loss == 5000
    sf.sender.bytes_sent = 12000
    assert sf.inter_loss == 7000


def test_lia_update_matches_formula():
    _, meta, _ = build_connection()
    for sf in meta.subflows:
        sf.started = True
    sf = meta.subflows[0]
    expected = mptcp.lia_increase([10.0, 10.0], [1.0, 1.0], 0) * 2
    assert mptcp.lia_update(meta, sf, 2) == pytest.approx(expected)


def test_lia_clamp_holds_on_lossy_paths(monkeypatch):
    calls = []
    real = mptcp.lia_increase

    def spy(windows, rtts, r):
        inc = real(windows, rtts, r)
        calls.append((windows[r], inc))
        return inc

    monkeypatch.setattr(mptcp, 'lia_increase', spy)
    sim = Simulator(1)
    tcp_cfg = TcpConfig()
    meta = MptcpConnection(sim, MptcpConfig(enabled=True, cc='lia',
                                            second_path='lte'),
                           tcp_cfg, ByteStream(10 ** 8), lambda chunks: None)
    # small drop-tail buffers force losses and congestion avoidance
    for flow, rate in enumerate((10e6, 5e6)):
        hop = FixedRateHop(sim, rate, ms(10), 30000, ms(1),
                           'hop{}'.format(flow))
        sender = TcpSender(sim, NewReno(), tcp_cfg, flow, None,
                           label='sf{}'.format(flow))
        receiver = TcpReceiver(sim, tcp_cfg, flow, None, None)
        sender.route = (hop, receiver)
        receiver.ack_route = (DelayLine(sim, ms(10)), sender)
        meta.add_subflow('path{}'.format(flow), sender, receiver)
    for sf in meta.subflows:
        meta.start_subflow(sf)
    sim.run(seconds(10))
    assert calls
    assert all(inc <= 1.0 / w * (1 + 1e-12) for w, inc in calls)


def test_balia_update_events():
    _, meta, _ = build_connection(cc='balia')
    for sf in meta.subflows:
        sf.started = True
    sf = meta.subflows[0]
    # no RTT sample yet: both subflows rank at the initial RTO
    assert mptcp.balia_update(meta, sf, 'ack', 2) == pytest.approx(0.05)
    assert mptcp.balia_update(meta, sf, 'loss') == pytest.approx(-5.0)
    with pytest.raises(ValueError):
        mptcp.balia_update(meta, sf, 'timeout')


def test_uncoupled_subflows_are_independent():
    _, meta, _ = build_connection(cc='cubic')
    first, second = meta.subflows
    before = second.sender.conn.cwnd
    conn = mptcp.uncoupled_on_ack(first, 1400, 0.0)
    assert conn.cwnd == pytest.approx(11 * 1400)
    tcp.on_triple_dupack(first.sender.conn, first.sender.cc, 0.1)
    assert second.sender.conn.cwnd == before
    assert first.sender.conn.cwnd < 11 * 1400


def test_pump_fills_fractional_room():
    sim, meta, _ = build_connection(delays=(5,))
    sf = meta.subflows[0]
    sf.sender.conn.cwnd = 10.5 * 1400
    meta.start_subflow(sf)
    assert sf.sender.sent == 11
    assert not sf.sender.has_room()


cc_events = st.lists(st.one_of(
    st.tuples(st.just('ack'), st.integers(1, 4 * 1400)),
    st.tuples(st.just('loss'), st.just(0)),
    st.tuples(st.just('timeout'), st.just(0)),
    st.tuples(st.just('new_ack'), st.just(0))), max_size=300)


def apply_event(conn, cc, est, event, now):
    kind, size = event
    if kind == 'ack':
        cc.on_ack(conn, size, now)
    elif kind == 'loss':
        tcp.on_triple_dupack(conn, cc, now)
        # recovery ends on the full ACK
        conn.phase = tcp.Phase.CONGESTION_AVOIDANCE
        conn.cwnd = max(conn.ssthresh, float(conn.mss))
    elif kind == 'timeout':
        conn.snd_una = 0
        conn.snd_nxt = 20 * conn.mss
        tcp.on_rto(conn, est, cc, now)
    else:
        est.reset_backoff()


@pytest.mark.parametrize("cc", ['lia', 'olia', 'balia'])
@settings(max_examples=40, deadline=None)
@given(events=cc_events)
def test_single_subflow_coupled_matches_newreno(cc, events):
    _, meta, _ = build_connection(cc=cc, delays=(5,))
    sf = meta.subflows[0]
    sf.started = True
    coupled = sf.sender.conn
    reno = tcp.TcpConnectionState(mss=coupled.mss, cwnd=coupled.cwnd)
    reno_cc = NewReno()
    reno_est = tcp.RttEstimator()
    for i, event in enumerate(events):
        now = 0.01 * i
        apply_event(coupled, sf.sender.cc, sf.sender.est, event, now)
        apply_event(reno, reno_cc, reno_est, event, now)
        assert coupled.phase == reno.phase
        assert coupled.cwnd == pytest.approx(reno.cwnd, rel=1e-9)
        assert coupled.ssthresh == pytest.approx(reno.ssthresh, rel=1e-9)
