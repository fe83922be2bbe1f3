"""
Single-path TCP: sender with NewReno or CUBIC congestion control, RTO
estimation with Karn's rule and exponential backoff, and a cumulative-ACK
receiver.

Windows are held in bytes. The receiver answers each delivery batch with one
ACK carrying the number of segments that did not advance ``rcv_nxt``; the
sender treats those as that many duplicate ACKs and runs congestion control
once per newly acknowledged segment.
"""
import enum
import heapq
import logging
import math
from dataclasses import dataclass, replace

from .bearer import Packet, DATA, ACK, forward
from .engine import SimulationError
from .utils import seconds


logger = logging.getLogger(__name__)

DUPACK_THRESHOLD = 3


class Phase(enum.Enum):
    SLOW_START = 'slow_start'
    CONGESTION_AVOIDANCE = 'congestion_avoidance'
    FAST_RECOVERY = 'fast_recovery'


@dataclass
class TcpConnectionState:
    mss: int = 1400
    cwnd: float = 14000.0
    ssthresh: float = math.inf
    phase: Phase = Phase.SLOW_START
    dup_acks: int = 0
    snd_una: int = 0
    snd_nxt: int = 0
    high_tx: int = 0
    rwnd: int = 1 << 25

    @property
    def inflight(self):
        return self.snd_nxt - self.snd_una

    @property
    def cwnd_mss(self):
        return self.cwnd / self.mss


class RttEstimator(object):
    def __init__(self, min_rto=0.2, initial_rto=1.0, max_rto=60.0):
        """
        Smoothed RTT and retransmission timeout, all values in seconds
        """
        self.min_rto = min_rto
        self.max_rto = max_rto
        self.srtt = None
        self.rttvar = None
        self._base = initial_rto
        self.backoff = 0
        # timeouts since the last ACK of new data
        self.timeouts = 0

    @property
    def rto(self):
        return min(self.max_rto, self._base * (2 ** self.backoff))

    def update(self, sample, retransmitted=False):
        """
        Fold one RTT sample into the estimate

        Parameters
        ----------
        sample: float
            Measured round trip time in seconds
        retransmitted: bool
            Whether the timed segment was ever retransmitted; such samples
            are ambiguous and refused
        """
        if retransmitted:
            raise SimulationError('RTT sample taken from a retransmitted '
                                  'segment')
        if sample <= 0:
            raise ValueError('RTT sample must be positive, got {!r}'
                             .format(sample))
        if self.srtt is None:
            self.srtt = sample
            self.rttvar = sample / 2.0
        else:
            self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.srtt - sample)
            self.srtt = 0.875 * self.srtt + 0.125 * sample
        self._base = min(self.max_rto,
                         max(self.min_rto, self.srtt + 4.0 * self.rttvar))
        self.backoff = 0
        self.timeouts = 0

    def on_timeout(self):
        self.timeouts += 1
        if self.rto < self.max_rto:
            self.backoff += 1

    def reset_backoff(self):
        self.backoff = 0
        self.timeouts = 0


def rtt_update(est, sample):
    est.update(sample)
    return est


class NewReno(object):
    name = 'newreno'

    def on_ack(self, conn, acked_bytes, now):
        """
        Grow ``conn.cwnd`` for ``acked_bytes`` newly acknowledged in one ACK
        """
        if conn.phase == Phase.SLOW_START:
            conn.cwnd += min(acked_bytes, conn.mss)
            if conn.cwnd >= conn.ssthresh:
                conn.phase = Phase.CONGESTION_AVOIDANCE
        else:
            self.avoid(conn, acked_bytes, now)

    def avoid(self, conn, acked_bytes, now):
        conn.cwnd += conn.mss * acked_bytes / conn.cwnd

    def on_congestion(self, conn, now):
        conn.ssthresh = max(conn.cwnd / 2.0, 2.0 * conn.mss)
        conn.cwnd = conn.ssthresh

    def on_timeout(self, conn, now):
        pass

    def snapshot(self):
        """
        Controller state outside ``conn``, for ``restore`` after a
        spurious timeout
        """
        return None

    def restore(self, state):
        pass


def newreno_on_ack(conn, acked_bytes):
    NewReno().on_ack(conn, acked_bytes, 0.0)
    return conn


@dataclass
class CubicState:
    """
    Epoch of the cubic window function, windows in MSS

    ``k`` is the time to climb back to ``origin``, taken as
    ``cbrt((w_max - cwnd) / c)`` when an epoch starts below ``w_max``. After
    a plain loss ``w_max`` is the window at the loss and ``cwnd`` is
    ``beta * w_max``, so ``k = cbrt(w_max * (1 - beta) / c)``. With fast
    convergence a loss below the previous ``w_max`` records
    ``w * (1 + beta) / 2`` instead, which shortens ``k`` to
    ``cbrt(w * (1 - beta) / (2 * c))``.
    """
    c: float = 0.4
    beta: float = 0.7
    w_max: float = 0.0
    k: float = 0.0
    origin: float = 0.0
    epoch_start: float = None
    w_est: float = 0.0


def cubic_window(state, t):
    """
    Target window in MSS ``t`` seconds into the current epoch
    """
    return state.c * (t - state.k) ** 3 + state.origin


class Cubic(NewReno):
    name = 'cubic'

    def __init__(self, c=0.4, beta=0.7, fast_convergence=True):
        self.state = CubicState(c=c, beta=beta)
        self.fast_convergence = fast_convergence

    def _start_epoch(self, cwnd_mss, now):
        s = self.state
        s.epoch_start = now
        if cwnd_mss < s.w_max:
            s.k = ((s.w_max - cwnd_mss) / s.c) ** (1.0 / 3.0)
            s.origin = s.w_max
        else:
            s.k = 0.0
            s.origin = cwnd_mss
        s.w_est = cwnd_mss

    def avoid(self, conn, acked_bytes, now):
        s = self.state
        w = conn.cwnd_mss
        if s.epoch_start is None:
            self._start_epoch(w, now)
        acked = acked_bytes / conn.mss
        target = cubic_window(s, now - s.epoch_start)
        s.w_est += 3.0 * (1.0 - s.beta) / (1.0 + s.beta) * acked / w
        if s.w_est > target:
            target = s.w_est
        if target > w:
            # at most 1.5x growth per window of ACKs
            inc = min((target - w) / w, 0.5) * acked
        else:
            inc = 0.01 * acked / w
        conn.cwnd = (w + inc) * conn.mss

    def _record_loss(self, conn):
        s = self.state
        w = conn.cwnd_mss
        if self.fast_convergence and w < s.w_max:
            s.w_max = w * (1.0 + s.beta) / 2.0
        else:
            s.w_max = w

    def on_congestion(self, conn, now):
        self._record_loss(conn)
        conn.ssthresh = max(self.state.beta * conn.cwnd, 2.0 * conn.mss)
        conn.cwnd = conn.ssthresh
        self._start_epoch(conn.cwnd_mss, now)

    def on_timeout(self, conn, now):
        self._record_loss(conn)
        self.state.epoch_start = None

    def snapshot(self):
        return replace(self.state)

    def restore(self, state):
        self.state = state


def cubic_on_ack(conn, cubic, now, acked_bytes=None):
    if acked_bytes is None:
        acked_bytes = conn.mss
    cubic.on_ack(conn, acked_bytes, now)
    return conn


def on_triple_dupack(conn, cc, now):
    cc.on_congestion(conn, now)
    conn.phase = Phase.FAST_RECOVERY
    return conn


def on_rto(conn, est, cc, now):
    # a timeout repeated before any new ACK keeps ssthresh and the
    # controller's loss state from the first one
    if est.timeouts == 0:
        conn.ssthresh = max(conn.inflight / 2.0, 2.0 * conn.mss)
        cc.on_timeout(conn, now)
    conn.cwnd = float(conn.mss)
    conn.phase = Phase.SLOW_START
    conn.dup_acks = 0
    conn.snd_nxt = conn.snd_una
    est.on_timeout()
    return conn


class ByteStream(object):
    def __init__(self, total_bytes=None):
        """
        Application data source, unbounded when ``total_bytes`` is None
        """
        self.total = total_bytes
        self.offset = 0

    @property
    def exhausted(self):
        return self.total is not None and self.offset >= self.total

    def next_chunk(self, max_len):
        if self.total is None:
            length = max_len
        else:
            length = min(max_len, self.total - self.offset)
            if length <= 0:
                return None
        dsn = self.offset
        self.offset += length
        return dsn, length


class _Segment(object):
    __slots__ = ('length', 'dsn', 'sent_at', 'retx')

    def __init__(self, length, dsn, sent_at):
        self.length = length
        self.dsn = dsn
        self.sent_at = sent_at
        self.retx = False


class TcpSender(object):
    def __init__(self, sim, cc, tcp_cfg, flow, route, source=None,
                 label='tcp'):
        """
        Sending endpoint of one TCP connection or MP-TCP subflow

        Parameters
        ----------
        sim: Simulator
        cc: NewReno
            Congestion control object, NewReno, Cubic or a coupled variant
        tcp_cfg: TcpConfig
        flow: int
            Flow id stamped on every segment
        route: tuple
            Hops a data segment traverses, ending at the receiver
        source: ByteStream
            Data source pulled by ``pump()``; None when an MP-TCP scheduler
            assigns data through ``send_new()``
        """
        self.sim = sim
        self.cc = cc
        self.cfg = tcp_cfg
        self.flow = flow
        self.route = route
        self.source = source
        self.label = label
        self.conn = TcpConnectionState(
            mss=tcp_cfg.mss, cwnd=float(tcp_cfg.init_cwnd_mss * tcp_cfg.mss),
            rwnd=tcp_cfg.rwnd_bytes)
        self.est = RttEstimator(tcp_cfg.min_rto_ms / 1e3,
                                tcp_cfg.initial_rto_ms / 1e3,
                                tcp_cfg.max_rto_ms / 1e3)
        self.header = tcp_cfg.header_bytes
        self.segments = {}
        self._recover = 0
        self._partial_acks = 0
        self._deadline = None
        self._timer = None
        self.undo_enabled = tcp_cfg.spurious_rto_undo
        self._undo = None
        self._rto_at = None
        self.on_pump = None
        self.on_acked = None
        self.closed = False
        self.sent = 0
        self.retransmits = 0
        self.timeouts = 0
        self.spurious_timeouts = 0
        self.fast_recoveries = 0
        self.bytes_sent = 0

    @property
    def window(self):
        return min(self.conn.cwnd, self.conn.rwnd)

    def has_room(self):
        conn = self.conn
        return conn.inflight < self.window

    def _packet(self, seq, seg):
        return Packet(DATA, self.flow, self.route, seq=seq, length=seg.length,
                      size=seg.length + self.header, dsn=seg.dsn,
                      retx=seg.retx, ts=self.sim.now)

    def _new_segment(self, dsn, length):
        conn = self.conn
        seq = conn.high_tx
        seg = _Segment(length, dsn, self.sim.now)
        self.segments[seq] = seg
        conn.high_tx += length
        conn.snd_nxt = conn.high_tx
        self.sent += 1
        self.bytes_sent += length
        return self._packet(seq, seg)

    def _resend(self, seq):
        seg = self.segments[seq]
        seg.retx = True
        seg.sent_at = self.sim.now
        self.retransmits += 1
        return self._packet(seq, seg)

    def _transmit(self, packets):
        if packets:
            forward(packets)
            self._arm_timer()

    def pump(self):
        """
        Send whatever the window allows: go-back-N retransmissions after a
        timeout first, then new data from ``source``

        Returns
        -------
            List of Packet handed to the first hop
        """
        if self.closed:
            return []
        conn = self.conn
        out = []
        while conn.snd_nxt < conn.high_tx and self.has_room():
            seq = conn.snd_nxt
            out.append(self._resend(seq))
            conn.snd_nxt = seq + self.segments[seq].length
        if self.source is not None:
            while self.has_room():
                chunk = self.source.next_chunk(conn.mss)
                if chunk is None:
                    break
                out.append(self._new_segment(*chunk))
        self._transmit(out)
        if self.on_pump is not None:
            self.on_pump()
        return out

    def send_new(self, chunks):
        """
        Transmit scheduler-assigned ``(dsn, length)`` chunks as new segments
        """
        if self.closed:
            raise SimulationError('{}: data assigned to a closed subflow'
                                  .format(self.label))
        self._transmit([self._new_segment(dsn, length)
                        for dsn, length in chunks])

    def pending_retransmission(self):
        return self.conn.snd_nxt < self.conn.high_tx

    def push(self, packets):
        for pkt in packets:
            self.on_ack(pkt)
        self.pump()

    def on_ack(self, pkt):
        if self.closed:
            return
        conn = self.conn
        now = self.sim.now
        ack = pkt.ack
        if ack > conn.high_tx:
            raise SimulationError('{}: ACK {} beyond highest sent byte {}'
                                  .format(self.label, ack, conn.high_tx))
        if ack > conn.snd_una:
            acked = []
            seq = conn.snd_una
            segments = self.segments
            last = None
            while seq < ack:
                seg = segments.pop(seq)
                acked.append(seg.length)
                last = seg
                seq += seg.length
            if not last.retx:
                self.est.update((now - last.sent_at) / 1e9)
            else:
                self.est.reset_backoff()
            conn.snd_una = ack
            if conn.snd_nxt < ack:
                conn.snd_nxt = ack
            if self._undo is not None:
                # an echo older than the timeout acknowledges an original
                if pkt.echo is not None and pkt.echo < self._rto_at:
                    self._undo_timeout()
                self._undo = None
            now_s = now / 1e9
            if conn.phase == Phase.FAST_RECOVERY:
                if ack >= self._recover:
                    conn.phase = Phase.CONGESTION_AVOIDANCE
                    conn.cwnd = max(conn.ssthresh, float(conn.mss))
                else:
                    # partial ACK: the next hole is lost too
                    self._partial_acks += 1
                    self._transmit([self._resend(conn.snd_una)])
            else:
                for length in acked:
                    self.cc.on_ack(conn, length, now_s)
            conn.dup_acks = pkt.dup
            if self.on_acked is not None:
                self.on_acked(self, sum(acked))
            if conn.inflight == 0:
                self._stop_timer()
            elif not (conn.phase == Phase.FAST_RECOVERY and
                      self._partial_acks > 1):
                # only the first partial ACK of a recovery restarts the timer
                self._deadline = now + seconds(self.est.rto)
        elif ack == conn.snd_una and pkt.dup and conn.inflight > 0:
            conn.dup_acks += pkt.dup
        else:
            return
        if (conn.dup_acks >= DUPACK_THRESHOLD and
                conn.phase != Phase.FAST_RECOVERY and
                conn.snd_una >= self._recover and conn.inflight > 0):
            self._fast_retransmit(now)

    def _fast_retransmit(self, now):
        conn = self.conn
        on_triple_dupack(conn, self.cc, now / 1e9)
        self._recover = conn.high_tx
        self._partial_acks = 0
        self._undo = None
        conn.dup_acks = 0
        self.fast_recoveries += 1
        if self.on_acked is not None:
            self.on_acked(self, 0, loss=True)
        self._transmit([self._resend(conn.snd_una)])

    def _arm_timer(self):
        if self._deadline is None:
            self._deadline = self.sim.now + seconds(self.est.rto)
        if self._timer is None:
            self._timer = self.sim.schedule(self._deadline, self._check_timer)

    def _stop_timer(self):
        self._deadline = None
        if self._timer is not None:
            self.sim.cancel(self._timer)
            self._timer = None

    def _check_timer(self):
        self._timer = None
        if self.closed or self._deadline is None or self.conn.inflight == 0:
            self._deadline = None
            return
        if self.sim.now < self._deadline:
            self._timer = self.sim.schedule(self._deadline, self._check_timer)
            return
        self._on_timeout()

    def _on_timeout(self):
        conn = self.conn
        now = self.sim.now
        self.timeouts += 1
        logger.debug('{}: RTO at {:.3f} s, cwnd {:.1f} MSS, rto {:.3f} s'
                     .format(self.label, now / 1e9, conn.cwnd_mss,
                             self.est.rto))
        if (self.undo_enabled and self.est.timeouts == 0 and
                conn.phase != Phase.FAST_RECOVERY):
            self._undo = (conn.cwnd, conn.ssthresh, conn.phase,
                          self.cc.snapshot())
            self._rto_at = now
        on_rto(conn, self.est, self.cc, now / 1e9)
        self._recover = conn.high_tx
        if self.on_acked is not None:
            self.on_acked(self, 0, loss=True)
        self._deadline = now + seconds(self.est.rto)
        self.pump()
        self._arm_timer()

    def _undo_timeout(self):
        """
        Return to the window and controller state held before a timeout
        that the first new ACK shows to be spurious, and resume after
        ``high_tx`` instead of resending the window
        """
        conn = self.conn
        cwnd, ssthresh, phase, cc_state = self._undo
        conn.cwnd = max(conn.cwnd, cwnd)
        conn.ssthresh = ssthresh
        conn.phase = phase
        conn.snd_nxt = conn.high_tx
        self.cc.restore(cc_state)
        self.spurious_timeouts += 1
        logger.debug('{}: spurious RTO undone at {:.3f} s, cwnd {:.1f} MSS'
                     .format(self.label, self.sim.now / 1e9, conn.cwnd_mss))

    def close(self):
        self.closed = True
        self._stop_timer()

    def unacked_chunks(self):
        """
        (dsn, length) of every sent segment not yet acknowledged
        """
        return [(seg.dsn, seg.length) for seq, seg in
                sorted(self.segments.items())]


def sender_pump(sender):
    return sender.pump()


class TcpReceiver(object):
    def __init__(self, sim, tcp_cfg, flow, ack_route, on_data,
                 label='tcp-rx'):
        """
        Receiving endpoint: reassembles by sequence number, hands in-order
        ``(dsn, length, flow)`` triples to ``on_data`` and returns
        cumulative ACKs along ``ack_route``
        """
        self.sim = sim
        self.flow = flow
        self.ack_route = ack_route
        self.on_data = on_data
        self.label = label
        self.header = tcp_cfg.header_bytes
        self.delayed = tcp_cfg.delayed_ack
        self.delay = int(tcp_cfg.delayed_ack_ms * 1e6)
        self.rcv_nxt = 0
        self.ts_recent = None
        self._ooo = []
        self._held = 0
        self._timer = None
        self.acks_sent = 0
        self.duplicates = 0

    def _take(self, seq, length, dsn, out):
        # deliver the part of [seq, seq + length) beyond rcv_nxt
        skip = self.rcv_nxt - seq
        out.append((dsn + skip, length - skip, self.flow))
        self.rcv_nxt = seq + length

    def push(self, packets):
        delivered = []
        dup = 0
        ooo = self._ooo
        for pkt in packets:
            seq = pkt.seq
            end = seq + pkt.length
            if seq <= self.rcv_nxt < end:
                self.ts_recent = pkt.ts
                self._take(seq, pkt.length, pkt.dsn, delivered)
                while ooo and ooo[0][0] <= self.rcv_nxt:
                    s, length, dsn = heapq.heappop(ooo)
                    if s + length > self.rcv_nxt:
                        self._take(s, length, dsn, delivered)
            elif seq > self.rcv_nxt:
                heapq.heappush(ooo, (seq, pkt.length, pkt.dsn))
                dup += 1
            else:
                self.duplicates += 1
                dup += 1
        self._acknowledge(len(packets) - dup, dup)
        if delivered:
            self.on_data(delivered)

    def _acknowledge(self, in_order, dup):
        if not self.delayed or dup or self._ooo:
            self._send_ack(dup)
            return
        self._held += in_order
        if self._held >= 2:
            self._send_ack(0)
        elif self._timer is None:
            self._timer = self.sim.schedule_in(self.delay, self._on_delack)

    def _on_delack(self):
        self._timer = None
        if self._held:
            self._send_ack(0)

    def _send_ack(self, dup):
        if self._timer is not None:
            self.sim.cancel(self._timer)
            self._timer = None
        self._held = 0
        self.acks_sent += 1
        forward([Packet(ACK, self.flow, self.ack_route, size=self.header,
                        ack=self.rcv_nxt, dup=dup, echo=self.ts_recent)])
