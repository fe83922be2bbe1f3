"""
Packets, hops and the radio bearers that carry them.

A packet is source routed: ``route`` lists the hops it visits and ``hop`` is
the index of the one currently holding it. Every hop exposes
``push(packets)`` and hands what it is done with to ``forward()``.
"""
import logging

from .channel import LteChannel, slot_ticks
from .harq import HarqEntity, MacEntity
from .rlc import (PdcpBuffer, RlcAmTx, RlcAmRx, RlcUmTx, RlcUmRx, StatusPdu,
                  RADIO_LINK_FAILURE)
from .utils import ms


logger = logging.getLogger(__name__)

DATA = 'data'
ACK = 'ack'

UPLINK = 'uplink'
DOWNLINK = 'downlink'


class Packet(object):
    __slots__ = ('kind', 'flow', 'seq', 'length', 'size', 'dsn', 'ack',
                 'dup', 'route', 'hop', 'ingress', 'retx', 'ts', 'echo')

    def __init__(self, kind, flow, route, seq=0, length=0, size=0, dsn=0,
                 ack=0, dup=0, retx=False, ts=0, echo=None):
        self.kind = kind
        self.flow = flow
        self.route = route
        self.hop = -1
        self.seq = seq
        self.length = length
        self.size = size
        self.dsn = dsn
        self.ack = ack
        self.dup = dup
        self.ingress = 0
        self.retx = retx
        # send time of a segment, and on an ACK the send time it echoes
        self.ts = ts
        self.echo = echo

    def __repr__(self):
        return ('Packet({}, flow={}, seq={}, len={}, ack={})'
                .format(self.kind, self.flow, self.seq, self.length, self.ack))


def forward(packets):
    """
    Advance each packet to its next hop, pushing runs of consecutive
    packets that share a hop as one batch
    """
    batch = []
    target = None
    for pkt in packets:
        pkt.hop += 1
        nxt = pkt.route[pkt.hop]
        if nxt is not target:
            if batch:
                target.push(batch)
            batch = []
            target = nxt
        batch.append(pkt)
    if batch:
        target.push(batch)


class BearerStats(object):
    """
    Per-direction packet accounting; latency counts data packets only,
    from PDCP ingress to in-order delivery, once ``measure_from`` is reached
    """

    def __init__(self):
        self.offered = 0
        self.offered_bytes = 0
        self.delivered = 0
        self.delivered_bytes = 0
        self.dropped = 0
        self.dropped_bytes = 0
        self.data_packets = 0
        self.ack_packets = 0
        self.measure_from = 0
        self.latency_sum = 0
        self.latency_count = 0

    @property
    def latency_mean_s(self):
        if not self.latency_count:
            return float('nan')
        return self.latency_sum / self.latency_count / 1e9

    def as_dict(self):
        return {
            'offered': self.offered,
            'delivered': self.delivered,
            'dropped': self.dropped,
            'data_packets': self.data_packets,
            'ack_packets': self.ack_packets,
        }


class _Hop(object):
    # shared ingress and delivery bookkeeping of bearer-like hops

    def __init__(self, sim, label):
        self.sim = sim
        self.label = label
        self.stats = BearerStats()

    def _count_in(self, pkt):
        stats = self.stats
        stats.offered += 1
        stats.offered_bytes += pkt.size
        if pkt.kind == DATA:
            stats.data_packets += 1
        else:
            stats.ack_packets += 1
        pkt.ingress = self.sim.now

    def _count_drop(self, pkt):
        self.stats.dropped += 1
        self.stats.dropped_bytes += pkt.size

    def _deliver(self, packets):
        stats = self.stats
        now = self.sim.now
        for pkt in packets:
            stats.delivered += 1
            stats.delivered_bytes += pkt.size
            if pkt.kind == DATA and now >= stats.measure_from:
                stats.latency_sum += now - pkt.ingress
                stats.latency_count += 1
        forward(packets)


class DelayLine(object):
    def __init__(self, sim, delay_ticks, label='core'):
        """
        Rate-unlimited hop adding a constant delay, used for the core
        network between the eNB and the remote host
        """
        self.sim = sim
        self.delay = delay_ticks
        self.label = label

    def push(self, packets):
        self.sim.schedule_in(self.delay, forward, packets)


class FixedRateHop(_Hop):
    def __init__(self, sim, rate_bps, latency_ticks, buffer_bytes, slot,
                 label):
        """
        Loss-free link serving whole packets at a fixed rate

        Parameters
        ----------
        rate_bps: float
            Serving rate
        latency_ticks: int
            One-way latency added after serving
        buffer_bytes: int
            Drop-tail ingress buffer bound
        slot: int
            Serving granularity in ticks
        """
        super(FixedRateHop, self).__init__(sim, label)
        self.latency = latency_ticks
        self.slot = slot
        self.bits_per_slot = rate_bps * slot / 1e9
        self.buffer = PdcpBuffer(buffer_bytes)
        self._credit = 0.0
        self._ticking = False

    def push(self, packets):
        for pkt in packets:
            self._count_in(pkt)
            if not self.buffer.enqueue(pkt):
                self._count_drop(pkt)
        if not self._ticking and len(self.buffer):
            self._ticking = True
            self.sim.schedule_in(self.slot, self._tick)

    def _tick(self):
        self._credit += self.bits_per_slot
        served = self.buffer.take_whole(int(self._credit // 8))
        self._credit -= 8 * sum(p.size for p in served)
        if served:
            self.sim.schedule_in(self.latency, self._deliver, served)
        if len(self.buffer):
            self.sim.schedule_in(self.slot, self._tick)
        else:
            self._ticking = False
            self._credit = 0.0


class LteLink(object):
    def __init__(self, sim, lte_cfg, buffer_bytes, label='lte'):
        """
        Uplink and downlink of the LTE carrier, fixed capacity and loss-free
        """
        channel = LteChannel(lte_cfg)
        slot = ms(lte_cfg.slot_ms)
        latency = ms(lte_cfg.latency_ms)
        self.label = label
        self.uplink = FixedRateHop(
            sim, channel.sample(UPLINK).slot_capacity_bits / (slot / 1e9),
            latency, buffer_bytes, slot, label + '/ul')
        self.downlink = FixedRateHop(
            sim, channel.sample(DOWNLINK).slot_capacity_bits / (slot / 1e9),
            latency, buffer_bytes, slot, label + '/dl')
        self.failed = False

    def direction(self, name):
        return self.uplink if name == UPLINK else self.downlink


class StubLink(object):
    def __init__(self, sim, stub_cfg, buffer_bytes, label='stub'):
        """
        Ideal fixed-rate pipe in both directions
        """
        slot = ms(1)
        rate = stub_cfg.rate_mbps * 1e6
        delay = ms(stub_cfg.delay_ms)
        self.label = label
        self.uplink = FixedRateHop(sim, rate, delay, buffer_bytes, slot,
                                   label + '/ul')
        self.downlink = FixedRateHop(sim, rate, delay, buffer_bytes, slot,
                                     label + '/dl')
        self.failed = False

    def direction(self, name):
        return self.uplink if name == UPLINK else self.downlink


class RadioDirection(_Hop):
    def __init__(self, link, name, duty, cfg):
        """
        One direction of a mmWave radio bearer: PDCP buffer, RLC entity
        pair, HARQ and MAC

        Parameters
        ----------
        link: RadioLink
            Owner, providing the channel and the failure handling
        name: str
            UPLINK or DOWNLINK
        duty: float
            Share of each slot given to this direction
        cfg: ScenarioConfig
        """
        sim = link.sim
        label = '{}/{}'.format(link.label, 'ul' if name == UPLINK else 'dl')
        super(RadioDirection, self).__init__(sim, label)
        self.link = link
        self.name = name
        self.duty = duty
        self.peer = None
        self.pdcp = PdcpBuffer(cfg.pdcp.buffer_bytes)
        r = cfg.rlc
        self.mode = r.mode
        if r.mode == 'am':
            self.tx = RlcAmTx(self.pdcp, r.window, r.sn_modulus, r.max_retx,
                              r.max_pdu_bytes, ms(r.poll_ms),
                              lambda: sim.now)
            self.rx = RlcAmRx(r.window, ms(r.status_ms))
        else:
            self.tx = RlcUmTx(self.pdcp, r.max_pdu_bytes)
            self.rx = RlcUmRx(sim, ms(r.reordering_ms))
            self.rx.on_deliver = self._deliver
        h = cfg.harq
        max_tx = h.max_tx if h.enabled else 1
        self.harq = HarqEntity(sim.stream('harq/' + label), h.processes,
                               max_tx, h.bler1, cfg.mmwave.mcs_floor_db)
        self.mac = MacEntity(sim, self.harq, self.tx, self._on_pdus,
                             self.tx.on_harq_done, slot_ticks(cfg.mmwave),
                             h.rtt_slots, label)

    def attach_peer(self, peer):
        # status reports for this direction travel in the peer's grants
        self.peer = peer
        if self.mode == 'am':
            peer.tx.status_source = self._take_status

    def _take_status(self, byte_budget):
        return self.rx.take_status(self.sim.now, byte_budget)

    def push(self, packets):
        failed = self.link.failed
        for pkt in packets:
            self._count_in(pkt)
            if failed or not self.pdcp.enqueue(pkt):
                self._count_drop(pkt)

    def _on_pdus(self, pdus):
        sdus = []
        for pdu in pdus:
            if isinstance(pdu, StatusPdu):
                if self.peer.tx.on_status(pdu) == RADIO_LINK_FAILURE:
                    self.link.fail('{}: RLC retransmissions exhausted'
                                   .format(self.peer.label))
                    return
            else:
                sdus.extend(self.rx.on_pdu(pdu))
        if sdus:
            self._deliver(sdus)

    def tear_down(self):
        self.mac.enabled = False
        self.stats.dropped_bytes += self.pdcp.clear()


class RadioLink(object):
    def __init__(self, sim, channel, cfg, data_direction=UPLINK, label='mm'):
        """
        mmWave bearer pair sharing one channel; the data direction receives
        ``mmwave.duty`` of each slot and the reverse direction the rest

        Parameters
        ----------
        sim: Simulator
        channel: StatisticalChannel or GeometricChannel
        cfg: ScenarioConfig
        data_direction: str
            UPLINK or DOWNLINK
        label: str
            Prefix of stream and log names
        """
        self.sim = sim
        self.channel = channel
        self.label = label
        self.failed = False
        self.failed_at = None
        self.listeners = []
        duty = cfg.mmwave.duty
        ul_duty = duty if data_direction == UPLINK else 1.0 - duty
        self.uplink = RadioDirection(self, UPLINK, ul_duty, cfg)
        self.downlink = RadioDirection(self, DOWNLINK, 1.0 - ul_duty, cfg)
        self.uplink.attach_peer(self.downlink)
        self.downlink.attach_peer(self.uplink)
        self._slot = slot_ticks(cfg.mmwave)
        self._event = sim.schedule_in(self._slot, self._tick)

    def direction(self, name):
        return self.uplink if name == UPLINK else self.downlink

    def _tick(self):
        channel = self.channel
        for d in (self.uplink, self.downlink):
            d.mac.slot_tick(channel.sample(d.duty))
        self._event = self.sim.schedule_in(self._slot, self._tick)

    def fail(self, reason):
        """
        Tear the bearer down for the rest of the run
        """
        if self.failed:
            return
        self.failed = True
        self.failed_at = self.sim.now
        logger.warning('{}: radio link failure at {:.3f} s ({})'
                       .format(self.label, self.sim.now_s, reason))
        self.sim.cancel(self._event)
        self.uplink.tear_down()
        self.downlink.tear_down()
        for listener in self.listeners:
            listener(self)
