"""
Multipath TCP: subflows, the minimum-RTT scheduler, connection-level
reassembly and the coupled congestion controllers LIA, OLIA and BALIA.

Coupled window arithmetic is done in MSS units with RTTs in seconds and only
applies in congestion avoidance; slow start stays per subflow.
"""
import collections
import heapq
import logging
import math

from .tcp import NewReno, Cubic


logger = logging.getLogger(__name__)

CC_KINDS = ('cubic', 'lia', 'olia', 'balia')


def lia_increase(windows, rtts, r):
    """
    LIA increase of subflow ``r`` per acknowledged MSS

    Parameters
    ----------
    windows: list
        Congestion windows of all subflows in MSS
    rtts: list
        Smoothed RTTs in seconds, same order
    r: int
        Index of the acknowledged subflow
    """
    total = sum(windows)
    best = max(w / (rtt * rtt) for w, rtt in zip(windows, rtts))
    rate = sum(w / rtt for w, rtt in zip(windows, rtts))
    alpha = total * best / (rate * rate)
    return min(alpha / total, 1.0 / windows[r])


def olia_alphas(windows, rtts, inter_loss):
    """
    OLIA re-balancing terms; positive on best paths without the largest
    window, negative on largest-window paths, summing to zero
    """
    n = len(windows)
    quality = [l / (rtt * rtt) for l, rtt in zip(inter_loss, rtts)]
    top = max(quality)
    best = {i for i, q in enumerate(quality) if q >= top}
    w_top = max(windows)
    largest = {i for i, w in enumerate(windows) if w >= w_top}
    collected = best - largest
    alphas = [0.0] * n
    if collected:
        for i in collected:
            alphas[i] = 1.0 / (n * len(collected))
        for i in largest:
            alphas[i] = -1.0 / (n * len(largest))
    return alphas


def olia_increase(windows, rtts, inter_loss, r):
    rate = sum(w / rtt for w, rtt in zip(windows, rtts))
    alpha = olia_alphas(windows, rtts, inter_loss)[r]
    w = windows[r]
    return (w / (rtts[r] * rtts[r])) / (rate * rate) + alpha / w


def _balia_alpha(windows, rtts, r):
    rates = [w / rtt for w, rtt in zip(windows, rtts)]
    return max(rates) / rates[r], rates


def balia_increase(windows, rtts, r):
    alpha, rates = _balia_alpha(windows, rtts, r)
    total = sum(rates)
    return (rates[r] / rtts[r] / (total * total) *
            ((1.0 + alpha) / 2.0) * ((4.0 + alpha) / 5.0))


def balia_decrease(windows, rtts, r):
    """
    Window in MSS after a loss on subflow ``r``
    """
    alpha, _ = _balia_alpha(windows, rtts, r)
    w = windows[r]
    return w - (w / 2.0) * min(alpha, 1.5)


class Subflow(object):
    def __init__(self, sid, path, sender, receiver):
        """
        One TCP subflow of the meta connection

        Parameters
        ----------
        sid: int
            Creation index, also the scheduler tie-break
        path: str
            Name of the access link carrying it, e.g. "mm28" or "lte"
        """
        self.id = sid
        self.path = path
        self.sender = sender
        self.receiver = receiver
        self.started = False
        self.alive = True
        self.loss_interval = 0
        self._sent_at_loss = 0

    @property
    def usable(self):
        return self.started and self.alive

    @property
    def srtt(self):
        srtt = self.sender.est.srtt
        return math.inf if srtt is None else srtt

    @property
    def rtt(self):
        srtt = self.sender.est.srtt
        return self.sender.est.rto if srtt is None else srtt

    @property
    def window_mss(self):
        return self.sender.conn.cwnd_mss

    @property
    def inter_loss(self):
        since = self.sender.bytes_sent - self._sent_at_loss
        return max(self.loss_interval, since)

    def mark_loss(self):
        sent = self.sender.bytes_sent
        self.loss_interval = sent - self._sent_at_loss
        self._sent_at_loss = sent


class CoupledCC(NewReno):
    def __init__(self, kind, meta, subflow):
        """
        Congestion control of one subflow coupled to its siblings through
        ``meta``
        """
        if kind not in ('lia', 'olia', 'balia'):
            raise ValueError('Unknown coupled controller {!r}'.format(kind))
        self.name = kind
        self.meta = meta
        self.subflow = subflow

    def _vectors(self):
        flows = [sf for sf in self.meta.subflows if sf.usable]
        if self.subflow not in flows:
            flows.append(self.subflow)
        r = flows.index(self.subflow)
        return ([sf.window_mss for sf in flows], [sf.rtt for sf in flows],
                flows, r)

    def avoid(self, conn, acked_bytes, now):
        windows, rtts, flows, r = self._vectors()
        acked = acked_bytes / conn.mss
        if self.name == 'lia':
            inc = lia_increase(windows, rtts, r)
        elif self.name == 'olia':
            inc = olia_increase(windows, rtts,
                                [sf.inter_loss for sf in flows], r)
        else:
            inc = balia_increase(windows, rtts, r)
        conn.cwnd = max(conn.cwnd + inc * acked * conn.mss, float(conn.mss))

    def on_congestion(self, conn, now):
        if self.name != 'balia':
            return super(CoupledCC, self).on_congestion(conn, now)
        windows, rtts, _, r = self._vectors()
        w = balia_decrease(windows, rtts, r)
        conn.ssthresh = max(w * conn.mss, 2.0 * conn.mss)
        conn.cwnd = conn.ssthresh


def lia_update(meta, subflow, acked_mss):
    windows, rtts, _, r = CoupledCC('lia', meta, subflow)._vectors()
    return lia_increase(windows, rtts, r) * acked_mss


def balia_update(meta, subflow, event, acked_mss=1.0):
    """
    BALIA window change of ``subflow`` in MSS for an 'ack' or a 'loss'
    event; a loss gives a negative change
    """
    windows, rtts, _, r = CoupledCC('balia', meta, subflow)._vectors()
    if event == 'loss':
        return balia_decrease(windows, rtts, r) - windows[r]
    if event != 'ack':
        raise ValueError('Unknown event {!r}'.format(event))
    return balia_increase(windows, rtts, r) * acked_mss


def uncoupled_on_ack(subflow, acked_bytes, now):
    # the subflow's own controller, nothing shared with its siblings
    sender = subflow.sender
    sender.cc.on_ack(sender.conn, acked_bytes, now)
    return sender.conn


def scheduler_pick(subflows):
    """
    Subflow with window room and the smallest smoothed RTT; unmeasured RTTs
    rank last, ties go to the earliest created subflow

    Returns
    -------
        Subflow or None when every window is full
    """
    best = None
    for sf in subflows:
        if not sf.usable or not sf.sender.has_room():
            continue
        if sf.sender.pending_retransmission():
            continue
        if best is None or sf.srtt < best.srtt:
            best = sf
    return best


class MetaReceiver(object):
    def __init__(self, on_data):
        """
        Connection-level reassembly by data sequence number; ``on_data``
        receives in-order ``(dsn, length, subflow_id)`` triples exactly once
        """
        self.on_data = on_data
        self.data_nxt = 0
        self._ooo = []
        self.duplicates = 0

    def _take(self, dsn, length, flow, out):
        skip = self.data_nxt - dsn
        out.append((self.data_nxt, length - skip, flow))
        self.data_nxt = dsn + length

    def push(self, chunks):
        out = []
        ooo = self._ooo
        for dsn, length, flow in chunks:
            if dsn <= self.data_nxt < dsn + length:
                self._take(dsn, length, flow, out)
                while ooo and ooo[0][0] <= self.data_nxt:
                    d, ln, f = heapq.heappop(ooo)
                    if d + ln > self.data_nxt:
                        self._take(d, ln, f, out)
            elif dsn > self.data_nxt:
                heapq.heappush(ooo, (dsn, length, flow))
            else:
                self.duplicates += 1
        if out:
            self.on_data(out)


def meta_reassemble(receiver, chunks):
    receiver.push(chunks)
    return receiver.data_nxt


class MptcpConnection(object):
    def __init__(self, sim, mptcp_cfg, tcp_cfg, source, on_data,
                 label='mptcp'):
        """
        Meta connection owning the subflows of one MP-TCP session

        Parameters
        ----------
        sim: Simulator
        mptcp_cfg: MptcpConfig
        tcp_cfg: TcpConfig
        source: ByteStream
            Connection-level data source
        on_data: callable
            Application sink of in-order connection-level data
        """
        if mptcp_cfg.cc not in CC_KINDS:
            raise ValueError('Unknown MP-TCP congestion control {!r}'
                             .format(mptcp_cfg.cc))
        self.sim = sim
        self.cc_kind = mptcp_cfg.cc
        self.tcp_cfg = tcp_cfg
        self.source = source
        self.label = label
        self.subflows = []
        self.reinject = collections.deque()
        self.receiver = MetaReceiver(on_data)
        self._pumping = False

    def make_cc(self, subflow):
        if self.cc_kind == 'cubic':
            t = self.tcp_cfg
            return Cubic(t.cubic_c, t.cubic_beta, t.fast_convergence)
        return CoupledCC(self.cc_kind, self, subflow)

    def add_subflow(self, path, sender, receiver):
        """
        Register a subflow; it carries data once ``start_subflow`` runs
        """
        sf = Subflow(len(self.subflows), path, sender, receiver)
        sender.source = None
        sender.cc = self.make_cc(sf)
        sender.on_pump = self.pump
        sender.on_acked = self._on_subflow_event
        receiver.on_data = self.receiver.push
        self.subflows.append(sf)
        return sf

    def start_subflow(self, sf):
        sf.started = True
        logger.debug('{}: subflow {} on {} started at {:.3f} s'
                     .format(self.label, sf.id, sf.path, self.sim.now_s))
        self.pump()

    def subflow_of(self, sender):
        for sf in self.subflows:
            if sf.sender is sender:
                return sf
        raise KeyError(sender)

    def _on_subflow_event(self, sender, acked, loss=False):
        if loss:
            self.subflow_of(sender).mark_loss()

    def _next_chunk(self, max_len):
        data_nxt = self.receiver.data_nxt
        while self.reinject:
            dsn, length = self.reinject.popleft()
            if dsn + length <= data_nxt:
                continue
            if length > max_len:
                self.reinject.appendleft((dsn + max_len, length - max_len))
                length = max_len
            return dsn, length
        return self.source.next_chunk(max_len)

    def pump(self):
        """
        Hand new connection-level data to subflows in scheduler order until
        every window is full or the source is exhausted
        """
        if self._pumping:
            return
        self._pumping = True
        try:
            while True:
                sf = scheduler_pick(self.subflows)
                if sf is None:
                    break
                sender = sf.sender
                room = sender.window - sender.conn.inflight
                mss = sender.conn.mss
                chunks = []
                while room > 0:
                    chunk = self._next_chunk(mss)
                    if chunk is None:
                        break
                    chunks.append(chunk)
                    room -= chunk[1]
                if not chunks:
                    break
                sender.send_new(chunks)
        finally:
            self._pumping = False

    def on_path_failed(self, path):
        """
        Close the subflows on ``path`` and queue their unacknowledged data
        for the surviving ones
        """
        for sf in self.subflows:
            if sf.path != path or not sf.alive:
                continue
            sf.alive = False
            chunks = sf.sender.unacked_chunks()
            sf.sender.close()
            self.reinject.extend(sorted(chunks))
            logger.info('{}: subflow {} on {} lost, reinjecting {} segments'
                        .format(self.label, sf.id, path, len(chunks)))
        self.pump()
