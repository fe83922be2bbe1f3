import collections

import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.stateful import (RuleBasedStateMachine, initialize,
                                 invariant, rule)

from mmwtcp import rlc
from mmwtcp.engine import Simulator
from mmwtcp.rlc import PdcpBuffer, RlcAmTx, RlcAmRx, RlcUmRx, StatusPdu
from mmwtcp.utils import ms


Sdu = collections.namedtuple('Sdu', ['size'])


def am_tx(sizes, **kwargs):
    buf = PdcpBuffer(10 ** 7)
    for size in sizes:
        buf.enqueue(Sdu(size))
    return RlcAmTx(buf, **kwargs)


def send_all(tx, n, budget=100):
    # one whole-SDU PDU per grant, released from HARQ at once
    pdus = []
    for _ in range(n):
        out = tx.on_grant(budget)
        tx.on_harq_done(out, True)
        pdus.extend(out)
    return pdus


def test_segmentation():
    tx = am_tx([3000])
    sizes = [pdu.size for _ in range(3) for pdu in tx.on_grant(1200)]
    assert sizes == [1200, 1200, 600]
    assert tx.next_sn == 3


def test_empty_queues():
    tx = am_tx([])
    assert tx.on_grant(1200) == []
    assert tx.on_grant(0) == []


def test_pdu_concatenates_sdus():
    tx = am_tx([400, 400, 400])
    pdu, = tx.on_grant(1000)
    assert pdu.size == 1000
    assert [seg[2] for seg in pdu.segments] == [400, 400, 200]


def test_max_pdu_bytes():
    tx = am_tx([3000], max_pdu_bytes=1000)
    assert [p.size for p in tx.on_grant(2500)] == [1000, 1000, 500]


def test_retransmission_before_new_data():
    tx = am_tx([500])
    pdu, = tx.on_grant(500)
    tx.on_harq_done([pdu], False)
    assert tx.on_status(StatusPdu(1, [0])) == rlc.OK
    tx.buffer.enqueue(Sdu(1000))
    out = tx.on_grant(800)
    assert out[0] is pdu
    assert out[1].sn == 1
    assert out[1].size == 300
    assert tx.retransmitted == 1


def test_nack_queues_retransmission():
    tx = am_tx([100] * 4)
    send_all(tx, 4)
    assert tx.on_status(StatusPdu(4, [2])) == rlc.OK
    assert [p.sn for p in tx.retx_queue] == [2]
    assert tx.retx_queue[0].retx_count == 1
    assert list(tx.unacked) == [2]
    assert tx.ack_sn == 2


def test_nack_at_retx_limit_is_radio_link_failure():
    tx = am_tx([100] * 3)
    send_all(tx, 3)
    tx.unacked[2].retx_count = 5
    status = rlc.rlc_am_on_status(tx, StatusPdu(3, [2]))
    assert status == rlc.RADIO_LINK_FAILURE


def test_nack_ignored_while_in_harq():
    tx = am_tx([100] * 2)
    first = tx.on_grant(100)
    tx.on_harq_done(first, True)
    tx.on_grant(100)
    tx.on_status(StatusPdu(2, [1]))
    assert not tx.retx_queue
    assert tx.unacked[1].retx_count == 0


def test_ack_everything():
    tx = am_tx([100] * 5)
    send_all(tx, 5)
    tx.on_status(StatusPdu(5, []))
    assert not tx.unacked
    assert not tx.retx_queue
    assert tx.ack_sn == tx.next_sn == 5


def test_window_stall():
    tx = am_tx([100] * 4, window=2, sn_modulus=4)
    send_all(tx, 2)
    assert not tx.window_open()
    assert tx.on_grant(100) == []
    tx.on_status(StatusPdu(1, []))
    assert len(tx.on_grant(100)) == 1
    assert tx.wire_sn(tx.next_sn - 1) == 2


def test_window_larger_than_half_modulus():
    with pytest.raises(ValueError):
        RlcAmTx(PdcpBuffer(100), window=600, sn_modulus=1024)


@pytest.fixture
def pdus():
    return send_all(am_tx([100] * 10), 10)


def test_rx_in_order(pdus):
    rx = RlcAmRx()
    out = [rlc.rlc_am_on_pdu(rx, p) for p in pdus[:3]]
    assert [len(o) for o in out] == [1, 1, 1]


def test_rx_gap_fill(pdus):
    rx = RlcAmRx()
    first = rx.on_pdu(pdus[0])
    assert rx.on_pdu(pdus[2]) == []
    rest = rx.on_pdu(pdus[1])
    expected = [seg[0] for p in pdus[:3] for seg in p.segments]
    assert first + rest == expected


def test_rx_duplicate(pdus):
    rx = RlcAmRx()
    rx.on_pdu(pdus[0])
    assert len(rx.on_pdu(pdus[1])) == 1
    assert rx.on_pdu(pdus[1]) == []
    assert rx.duplicates == 1


def test_status_values(pdus):
    rx = RlcAmRx()
    assert rlc.rlc_am_status(rx) == StatusPdu(0, [])
    for i in (0, 1, 3):
        rx.on_pdu(pdus[i])
    status = rx.status()
    assert status == StatusPdu(4, [2])
    assert status.size == 5

    full = RlcAmRx()
    for p in pdus:
        full.on_pdu(p)
    assert full.status() == StatusPdu(10, [])


def test_take_status_prohibit_timer(pdus):
    rx = RlcAmRx(status_period_ticks=ms(5))
    assert rx.take_status(0, 100) is None
    rx.on_pdu(pdus[0])
    rx.on_pdu(pdus[2])
    assert rx.take_status(0, 100) == StatusPdu(3, [1])
    assert rx.take_status(ms(1), 100) is None
    # the hole is still open: repeat the report once the timer has run
    assert rx.take_status(ms(5), 100) == StatusPdu(3, [1])
    assert rx.take_status(ms(10), 4) is None
    rx.on_pdu(pdus[1])
    assert rx.take_status(ms(10), 100) == StatusPdu(3, [])
    assert rx.take_status(ms(20), 100) is None


def test_um_in_order_delivery(pdus):
    rx = RlcUmRx(Simulator())
    assert len(rlc.rlc_um_on_pdu(rx, pdus[0])) == 1
    assert len(rx.on_pdu(pdus[1])) == 1


def test_um_reordering_timer(pdus):
    sim = Simulator()
    rx = RlcUmRx(sim, ms(10))
    seen = []
    rx.on_deliver = lambda sdus: seen.append((sim.now, len(sdus)))
    rx.on_pdu(pdus[0])
    assert rx.on_pdu(pdus[2]) == []
    sim.run(ms(9))
    assert seen == []
    sim.run(ms(20))
    assert seen == [(ms(10), 1)]
    assert rx.skipped == 1
    # late copy of the skipped PDU is discarded
    assert rx.on_pdu(pdus[1]) == []


def test_um_timer_cancelled_by_gap_fill(pdus):
    sim = Simulator()
    rx = RlcUmRx(sim, ms(10))
    rx.on_pdu(pdus[1])
    assert len(rx.on_pdu(pdus[0])) == 2
    assert sim.pending() == 0


def test_um_partial_sdu_lost():
    buf = PdcpBuffer(10 ** 6)
    buf.enqueue(Sdu(3000))
    tx = rlc.RlcUmTx(buf)
    parts = [tx.on_grant(1200)[0] for _ in range(3)]
    sim = Simulator()
    rx = RlcUmRx(sim, ms(10))
    seen = []
    rx.on_deliver = seen.append
    rx.on_pdu(parts[0])
    rx.on_pdu(parts[2])
    sim.run(ms(20))
    assert seen == []
    assert rx.lost_sdus == 1


def test_pdcp_accept_and_drop():
    buf = PdcpBuffer(2 * 1024 * 1024)
    assert rlc.pdcp_enqueue(buf, Sdu(1400)) == 'accepted'
    full = PdcpBuffer(1400)
    full.enqueue(Sdu(1400))
    assert full.occupancy_bytes == full.capacity_bytes
    assert rlc.pdcp_enqueue(full, Sdu(1400)) == 'dropped'
    assert full.dropped == 1
    assert full.dropped_bytes == 1400


def test_pdcp_steady_overload():
    buf = PdcpBuffer(14000)
    offered = 0
    for _ in range(10000):
        for _ in range(2):
            buf.enqueue(Sdu(1400))
            offered += 1
        buf.take(1400)
    assert buf.dropped / offered == pytest.approx(0.5, abs=0.025)


def test_pdcp_take_segments():
    buf = PdcpBuffer(10000)
    a, b = Sdu(1000), Sdu(1000)
    buf.enqueue(a)
    buf.enqueue(b)
    assert buf.take(1500) == [(a, 0, 1000), (b, 0, 500)]
    assert buf.occupancy_bytes == 500
    assert buf.take(1500) == [(b, 500, 500)]
    assert len(buf) == 0


class RlcAmLink(RuleBasedStateMachine):
    """
    AM transmitter and receiver joined by a channel that loses PDUs and
    status reports
    """

    @initialize(sizes=st.lists(st.integers(50, 3000), min_size=1,
                               max_size=12))
    def open_link(self, sizes):
        buf = PdcpBuffer(10 ** 7)
        self.sdus = [Sdu(size) for size in sizes]
        for sdu in self.sdus:
            buf.enqueue(sdu)
        self.clock = 0
        self.tx = RlcAmTx(buf, window=16, sn_modulus=32, max_retx=1000,
                          poll_ticks=2, clock=lambda: self.clock)
        self.rx = RlcAmRx(window=16, status_period_ticks=0)
        self.delivered = []

    def _send(self, budget, lost):
        out = self.tx.on_grant(budget)
        self.tx.on_harq_done(out, False)
        for i, pdu in enumerate(out):
            if not lost or not lost[i % len(lost)]:
                self.delivered.extend(self.rx.on_pdu(pdu))

    @rule(budget=st.integers(200, 2000), lost=st.lists(st.booleans()))
    def transmit(self, budget, lost):
        self._send(budget, lost)

    @rule(dropped=st.booleans())
    def report(self, dropped):
        self.clock += 1
        status = self.rx.take_status(self.clock, 1000)
        if status is not None and not dropped:
            assert self.tx.on_status(status) == rlc.OK

    @rule()
    def tick(self):
        self.clock += 1

    @invariant()
    def delivered_once_in_order(self):
        assert len(self.delivered) <= len(self.sdus)
        assert all(a is b for a, b in zip(self.delivered, self.sdus))

    def teardown(self):
        if not hasattr(self, 'tx'):
            return
        # a clean channel completes the transfer
        for _ in range(500):
            if len(self.delivered) == len(self.sdus):
                break
            self._send(2000, [])
            self.report(False)
        assert len(self.delivered) == len(self.sdus)
        assert all(a is b for a, b in zip(self.delivered, self.sdus))


RlcAmLink.TestCase.settings = settings(max_examples=200,
                                       stateful_step_count=60,
                                       deadline=None)
TestRlcAmLink = RlcAmLink.TestCase


@settings(max_examples=100, deadline=None)
@given(sizes=st.lists(st.integers(50, 3000), min_size=1, max_size=12),
       budget=st.integers(200, 2000), data=st.data())
def test_um_delivers_in_order_at_most_once(sizes, budget, data):
    buf = PdcpBuffer(10 ** 7)
    sdus = [Sdu(size) for size in sizes]
    for sdu in sdus:
        buf.enqueue(sdu)
    tx = rlc.RlcUmTx(buf)
    pdus = []
    out = tx.on_grant(budget)
    while out:
        pdus.extend(out)
        out = tx.on_grant(budget)
    order = data.draw(st.permutations(pdus))
    kept = data.draw(st.lists(st.booleans(), min_size=len(pdus),
                              max_size=len(pdus)))
    sim = Simulator()
    rx = RlcUmRx(sim, ms(10))
    seen = []
    rx.on_deliver = seen.extend
    for pdu, keep in zip(order, kept):
        if keep:
            seen.extend(rx.on_pdu(pdu))
        sim.run(sim.now + ms(3))
    sim.run(sim.now + ms(20))
    position = {id(sdu): i for i, sdu in enumerate(sdus)}
    indices = [position[id(sdu)] for sdu in seen]
    assert indices == sorted(set(indices))
    if all(kept) and order == pdus:
        assert indices == list(range(len(sdus)))


def test_poll_recovers_tail_loss():
    clock = [0]
    tx = RlcAmTx(PdcpBuffer(10 ** 6), poll_ticks=ms(20),
                 clock=lambda: clock[0])
    tx.buffer.enqueue(Sdu(500))
    last, = tx.on_grant(1000)
    tx.on_harq_done([last], False)
    clock[0] = ms(19)
    assert tx.on_grant(1000) == []
    clock[0] = ms(20)
    assert tx.on_grant(1000) == [last]
    assert last.retx_count == 1
    assert tx.polls == 1
    tx.on_harq_done([last], True)
    # the receiver already had it: the duplicate still draws a status
    rx = RlcAmRx()
    rx.on_pdu(last)
    assert rx.take_status(0, 100) == StatusPdu(1, [])
    rx.on_pdu(last)
    assert rx.take_status(ms(5), 100) == StatusPdu(1, [])
    assert tx.on_status(StatusPdu(1, [])) == rlc.OK
    clock[0] = ms(60)
    assert tx.on_grant(1000) == []


def test_poll_disabled_without_clock():
    tx = am_tx([500], poll_ticks=ms(20))
    pdu, = tx.on_grant(1000)
    tx.on_harq_done([pdu], False)
    assert tx.on_grant(1000) == []
    assert tx.poll_ticks == 0
