"""
RLC acknowledged and unacknowledged mode entities and the bounded PDCP
ingress buffer they drain.

New data is concatenated and segmented into one PDU per grant (several if
``max_pdu_bytes`` caps the PDU size). Sequence numbers are kept as absolute
counters; the transmit window never exceeds half the modulus, so
``sn % sn_modulus`` identifies a PDU unambiguously on the air.
"""
import collections
import logging
from dataclasses import dataclass, field

from .utils import ms


logger = logging.getLogger(__name__)

OK = 'ok'
RADIO_LINK_FAILURE = 'radio_link_failure'


class PdcpBuffer(object):
    def __init__(self, capacity_bytes):
        """
        Drop-tail FIFO of SDUs in front of RLC

        Parameters
        ----------
        capacity_bytes: int
            Bound on bytes not yet handed to RLC
        """
        self.capacity_bytes = int(capacity_bytes)
        self.occupancy_bytes = 0
        self._fifo = collections.deque()
        self._head_offset = 0
        self.accepted = 0
        self.dropped = 0
        self.dropped_bytes = 0

    def __len__(self):
        return len(self._fifo)

    def enqueue(self, sdu):
        if self.occupancy_bytes + sdu.size > self.capacity_bytes:
            self.dropped += 1
            self.dropped_bytes += sdu.size
            return False
        self._fifo.append(sdu)
        self.occupancy_bytes += sdu.size
        self.accepted += 1
        return True

    def take(self, budget):
        """
        Remove up to ``budget`` bytes as (sdu, offset, length) segments
        """
        segments = []
        fifo = self._fifo
        while fifo and budget > 0:
            sdu = fifo[0]
            left = sdu.size - self._head_offset
            length = left if left <= budget else budget
            segments.append((sdu, self._head_offset, length))
            budget -= length
            self.occupancy_bytes -= length
            if length == left:
                fifo.popleft()
                self._head_offset = 0
            else:
                self._head_offset += length
        return segments

    def take_whole(self, budget):
        """
        Remove whole SDUs while they fit in ``budget`` bytes
        """
        out = []
        fifo = self._fifo
        while fifo and fifo[0].size <= budget:
            sdu = fifo.popleft()
            budget -= sdu.size
            self.occupancy_bytes -= sdu.size
            out.append(sdu)
        return out

    def head_size(self):
        return self._fifo[0].size if self._fifo else 0

    def clear(self):
        dropped = self.occupancy_bytes
        self._fifo.clear()
        self._head_offset = 0
        self.occupancy_bytes = 0
        return dropped


def pdcp_enqueue(buf, sdu):
    return 'accepted' if buf.enqueue(sdu) else 'dropped'


class RlcPdu(object):
    __slots__ = ('sn', 'segments', 'size', 'retx_count', 'queued')

    def __init__(self, sn, segments):
        self.sn = sn
        self.segments = segments
        self.size = sum(seg[2] for seg in segments)
        self.retx_count = 0
        self.queued = False

    def __repr__(self):
        return 'RlcPdu(sn={}, size={}, retx={})'.format(self.sn, self.size,
                                                        self.retx_count)


@dataclass
class StatusPdu:
    ack_sn: int
    nack_list: list = field(default_factory=list)

    @property
    def size(self):
        return 3 + 2 * len(self.nack_list)


class _Reassembler(object):
    # segments must arrive in SN order; a gap discards the partial SDU
    def __init__(self):
        self._sdu = None
        self._next = 0
        self.discarded = 0

    def feed(self, segments):
        done = []
        for sdu, offset, length in segments:
            if offset == 0:
                if self._sdu is not None:
                    self.discarded += 1
                self._sdu = sdu
                self._next = length
            elif self._sdu is sdu and offset == self._next:
                self._next += length
            else:
                if self._sdu is not None:
                    self.discarded += 1
                self._sdu = None
                continue
            if self._next == sdu.size:
                done.append(sdu)
                self._sdu = None
        return done

    def abandon(self):
        if self._sdu is not None:
            self.discarded += 1
        self._sdu = None


class RlcAmTx(object):
    def __init__(self, buffer, window=512, sn_modulus=1024, max_retx=5,
                 max_pdu_bytes=0, poll_ticks=0, clock=None):
        """
        Transmitting side of an RLC AM entity

        Parameters
        ----------
        buffer: PdcpBuffer
            Source of upper-layer SDUs
        window: int
            Transmit window in PDUs, at most half of ``sn_modulus``
        max_retx: int
            Retransmissions allowed per PDU before radio link failure
        max_pdu_bytes: int
            Cap on new-data PDU size, 0 for one PDU per grant
        poll_ticks: int
            Without new data or status for this long, resend the newest
            unacknowledged PDU so the receiver reports tail losses; 0 disables
        clock: callable
            Returns the current time in ticks, required for polling
        """
        if 2 * window > sn_modulus:
            raise ValueError('window {} exceeds half the SN space {}'
                             .format(window, sn_modulus))
        self.buffer = buffer
        self.window = window
        self.sn_modulus = sn_modulus
        self.max_retx = max_retx
        self.max_pdu_bytes = max_pdu_bytes
        self.next_sn = 0
        self.ack_sn = 0
        self.unacked = collections.OrderedDict()
        self.retx_queue = collections.deque()
        self.in_harq = collections.Counter()
        self.status_source = None
        self.retransmitted = 0
        self.poll_ticks = poll_ticks if clock is not None else 0
        self.clock = clock
        self.polls = 0
        self._progress = 0

    def window_open(self):
        return self.next_sn < self.ack_sn + self.window

    def wire_sn(self, sn):
        return sn % self.sn_modulus

    def on_grant(self, byte_budget):
        """
        Fill a grant: pending status report, then retransmissions, then new
        data segmented to fit

        Returns
        -------
            List of StatusPdu and RlcPdu
        """
        out = []
        if byte_budget <= 0:
            return out
        if self.status_source is not None:
            status = self.status_source(byte_budget)
            if status is not None:
                out.append(status)
                byte_budget -= status.size
        retx = self.retx_queue
        while retx and byte_budget > 0:
            pdu = retx[0]
            if pdu.size > byte_budget:
                break
            retx.popleft()
            pdu.queued = False
            out.append(pdu)
            byte_budget -= pdu.size
            self.in_harq[pdu.sn] += 1
            self.retransmitted += 1
        while byte_budget > 0 and self.window_open() and len(self.buffer):
            cap = byte_budget
            if self.max_pdu_bytes:
                cap = min(cap, self.max_pdu_bytes)
            pdu = RlcPdu(self.next_sn, self.buffer.take(cap))
            self.next_sn += 1
            self.unacked[pdu.sn] = pdu
            self.in_harq[pdu.sn] += 1
            out.append(pdu)
            byte_budget -= pdu.size
            self._progress = self._now()
        if self.poll_ticks and byte_budget > 0 and self.unacked:
            self._poll(out, byte_budget)
        return out

    def _now(self):
        return self.clock() if self.clock is not None else 0

    def _poll(self, out, byte_budget):
        now = self._now()
        if now - self._progress < self.poll_ticks:
            return
        pdu = self.unacked[next(reversed(self.unacked))]
        if pdu.queued or pdu.sn in self.in_harq or \
                pdu.retx_count >= self.max_retx or pdu.size > byte_budget:
            return
        self._progress = now
        pdu.retx_count += 1
        out.append(pdu)
        self.in_harq[pdu.sn] += 1
        self.retransmitted += 1
        self.polls += 1

    def on_harq_done(self, pdus, delivered):
        in_harq = self.in_harq
        for pdu in pdus:
            if isinstance(pdu, RlcPdu):
                in_harq[pdu.sn] -= 1
                if in_harq[pdu.sn] <= 0:
                    del in_harq[pdu.sn]

    def on_status(self, status):
        """
        Purge acknowledged PDUs and queue NACKed ones for retransmission

        Returns
        -------
            OK, or RADIO_LINK_FAILURE when a NACKed PDU has already used
            all of its retransmissions
        """
        self._progress = self._now()
        nacks = set(status.nack_list)
        for sn in range(self.ack_sn, min(status.ack_sn, self.next_sn)):
            if sn not in nacks:
                self.unacked.pop(sn, None)
        for sn in status.nack_list:
            pdu = self.unacked.get(sn)
            # still queued or inside a HARQ process: not lost yet
            if pdu is None or pdu.queued or sn in self.in_harq:
                continue
            if pdu.retx_count >= self.max_retx:
                return RADIO_LINK_FAILURE
            pdu.retx_count += 1
            pdu.queued = True
            self.retx_queue.append(pdu)
        if self.unacked:
            self.ack_sn = next(iter(self.unacked))
        else:
            self.ack_sn = self.next_sn
        return OK


class RlcAmRx(object):
    def __init__(self, window=512, status_period_ticks=ms(5)):
        """
        Receiving side of an RLC AM entity
        """
        self.window = window
        self.status_period = status_period_ticks
        self.rx_next = 0
        self.highest = 0
        self.buffer = {}
        self._reassembler = _Reassembler()
        self._last_status = None
        self._news = False
        self.duplicates = 0

    def on_pdu(self, pdu):
        """
        Buffer ``pdu`` and return the SDUs that became deliverable in order
        """
        sn = pdu.sn
        if sn >= self.rx_next + self.window:
            return []
        if sn < self.rx_next or sn in self.buffer:
            # a repeated PDU is a poll: answer it with a fresh status
            self.duplicates += 1
            self._news = True
            return []
        self.buffer[sn] = pdu
        self._news = True
        if sn >= self.highest:
            self.highest = sn + 1
        delivered = []
        buf = self.buffer
        while self.rx_next in buf:
            done = buf.pop(self.rx_next)
            delivered.extend(self._reassembler.feed(done.segments))
            self.rx_next += 1
        return delivered

    def status(self):
        ack_sn = max(self.highest, self.rx_next)
        nacks = [sn for sn in range(self.rx_next, ack_sn)
                 if sn not in self.buffer]
        return StatusPdu(ack_sn, nacks)

    def take_status(self, now, byte_budget):
        """
        Status report for the peer transmitter, or None while the prohibit
        timer runs or nothing changed and no hole is open
        """
        if self._last_status is not None and \
                now - self._last_status < self.status_period:
            return None
        if not self._news and self.rx_next == self.highest:
            return None
        status = self.status()
        if status.size > byte_budget:
            return None
        self._last_status = now
        self._news = False
        return status


def rlc_am_on_grant(tx, byte_budget):
    return tx.on_grant(byte_budget)


def rlc_am_on_pdu(rx, pdu):
    return rx.on_pdu(pdu)


def rlc_am_status(rx):
    return rx.status()


def rlc_am_on_status(tx, status):
    return tx.on_status(status)


class RlcUmTx(object):
    def __init__(self, buffer, max_pdu_bytes=0):
        self.buffer = buffer
        self.max_pdu_bytes = max_pdu_bytes
        self.next_sn = 0
        self.status_source = None

    def on_grant(self, byte_budget):
        out = []
        if self.status_source is not None and byte_budget > 0:
            status = self.status_source(byte_budget)
            if status is not None:
                out.append(status)
                byte_budget -= status.size
        while byte_budget > 0 and len(self.buffer):
            cap = byte_budget
            if self.max_pdu_bytes:
                cap = min(cap, self.max_pdu_bytes)
            pdu = RlcPdu(self.next_sn, self.buffer.take(cap))
            self.next_sn += 1
            out.append(pdu)
            byte_budget -= pdu.size
        return out

    def on_harq_done(self, pdus, delivered):
        pass


class RlcUmRx(object):
    def __init__(self, sim, reordering_ticks=ms(10)):
        """
        Receiving side of an RLC UM entity

        Out-of-order PDUs wait for at most ``reordering_ticks``; when the
        timer expires delivery skips the gap and any SDU with a missing
        segment is lost.
        """
        self.sim = sim
        self.reordering = reordering_ticks
        self.rx_next = 0
        self.buffer = {}
        self._reassembler = _Reassembler()
        self._timer = None
        self.on_deliver = None
        self.skipped = 0

    @property
    def lost_sdus(self):
        return self._reassembler.discarded

    def on_pdu(self, pdu):
        sn = pdu.sn
        if sn < self.rx_next or sn in self.buffer:
            return []
        self.buffer[sn] = pdu
        delivered = self._drain()
        if self.buffer and self._timer is None:
            self._timer = self.sim.schedule_in(self.reordering, self._expire)
        elif not self.buffer and self._timer is not None:
            self.sim.cancel(self._timer)
            self._timer = None
        return delivered

    def _drain(self):
        delivered = []
        buf = self.buffer
        while self.rx_next in buf:
            pdu = buf.pop(self.rx_next)
            delivered.extend(self._reassembler.feed(pdu.segments))
            self.rx_next += 1
        return delivered

    def _expire(self):
        self._timer = None
        if not self.buffer:
            return
        first = min(self.buffer)
        self.skipped += first - self.rx_next
        self.rx_next = first
        self._reassembler.abandon()
        delivered = self._drain()
        if self.buffer:
            self._timer = self.sim.schedule_in(self.reordering, self._expire)
        if delivered and self.on_deliver is not None:
            self.on_deliver(delivered)


def rlc_um_on_pdu(rx, pdu):
    return rx.on_pdu(pdu)
