"""
MAC slot scheduling with parallel stop-and-wait HARQ processes.

One transport block of new data may start per slot; failed blocks are
retransmitted ahead of new data until ``max_tx`` transmissions have been
spent, after which the block is dropped and the loss is left to RLC.
"""
import collections
import logging
from dataclasses import dataclass, field

from .engine import SimulationError


logger = logging.getLogger(__name__)

IDLE = 'idle'
AWAITING_FEEDBACK = 'awaiting_feedback'
PENDING_RETX = 'pending_retx'

DECODED = 'decoded'
FAILED = 'failed'

DELIVER = 'deliver'
RETRANSMIT = 'retransmit'
DROP = 'drop'


@dataclass
class TransportBlock:
    bits: int
    pdus: list
    attempt: int = 1
    # drawn once on the first transmission, shared by every retransmission
    draw: float = None


@dataclass
class HarqProcess:
    id: int
    state: str = IDLE
    block: TransportBlock = field(default=None)


def harq_decode(snr_db, attempt, draw, bler1=0.1, mcs_floor_db=-5.0):
    """
    Decode outcome of one transmission of a block

    ``draw`` is the uniform variate of the block, fixed across its
    transmissions. Attempt ``n`` fails while ``draw < bler1 ** n``, so the
    first attempt fails with probability ``bler1``, each retransmission
    fails with conditional probability ``bler1`` and a block survives
    ``n`` attempts with probability ``bler1 ** n``. Blocks are never
    scheduled below the MCS floor, so such a call is a caller error.

    Returns
    -------
        DECODED or FAILED
    """
    if attempt < 1:
        raise ValueError('attempt must be >= 1, got {!r}'.format(attempt))
    if snr_db < mcs_floor_db:
        raise SimulationError('No block is sent below the MCS floor '
                              '({!r} dB)'.format(snr_db))
    return FAILED if draw < bler1 ** attempt else DECODED


class HarqEntity(object):
    def __init__(self, rng, n_processes=8, max_tx=4, bler1=0.1,
                 mcs_floor_db=-5.0):
        """
        Set of stop-and-wait HARQ processes of one link direction

        Parameters
        ----------
        rng: RngStream
            Stream used for decode outcomes
        n_processes: int
            Number of parallel processes
        max_tx: int
            Total transmissions allowed per block, 1 disables HARQ
        bler1: float
            First-attempt block error rate
        """
        if max_tx < 1:
            raise ValueError('max_tx must be >= 1, got {!r}'.format(max_tx))
        self.rng = rng
        self.max_tx = max_tx
        self.bler1 = bler1
        self.mcs_floor_db = mcs_floor_db
        self.processes = [HarqProcess(i) for i in range(n_processes)]
        self.retx_queue = collections.deque()
        self.blocks = 0
        self.transmissions = 0
        self.residual_drops = 0

    def idle_process(self):
        for proc in self.processes:
            if proc.state == IDLE:
                return proc
        return None

    def decode(self, snr_db, block):
        if block.draw is None:
            block.draw = self.rng.uniform()
        return harq_decode(snr_db, block.attempt, block.draw, self.bler1,
                           self.mcs_floor_db)

    def on_feedback(self, proc, outcome):
        """
        Apply the decode outcome reported for ``proc``

        Returns
        -------
            DELIVER, RETRANSMIT or DROP
        """
        if proc.state != AWAITING_FEEDBACK:
            raise SimulationError('Feedback for HARQ process {} in state {!r}'
                                  .format(proc.id, proc.state))
        block = proc.block
        if outcome == DECODED:
            proc.state = IDLE
            proc.block = None
            return DELIVER
        if block.attempt < self.max_tx:
            proc.state = PENDING_RETX
            self.retx_queue.append(proc)
            return RETRANSMIT
        proc.state = IDLE
        proc.block = None
        self.residual_drops += 1
        return DROP


def harq_on_feedback(proc, outcome, entity):
    return entity.on_feedback(proc, outcome)


class MacEntity(object):
    def __init__(self, sim, harq, rlc_tx, deliver, on_block_done, slot_ticks,
                 harq_rtt_slots=4, label=''):
        """
        MAC of one link direction

        Parameters
        ----------
        sim: Simulator
        harq: HarqEntity
        rlc_tx: object
            Transmitting RLC entity, queried with ``on_grant(byte_budget)``
        deliver: callable
            Receives the PDU list of every decoded block
        on_block_done: callable
            Called as ``on_block_done(pdus, delivered)`` once a block
            leaves its HARQ process
        slot_ticks: int
            Slot duration in nanoseconds
        harq_rtt_slots: int
            Slots between a transmission and its feedback
        """
        self.sim = sim
        self.harq = harq
        self.rlc_tx = rlc_tx
        self.deliver = deliver
        self.on_block_done = on_block_done
        self.feedback_delay = slot_ticks * harq_rtt_slots
        self.label = label
        self.enabled = True
        self.deferred = 0

    def slot_tick(self, sample):
        """
        Serve one slot: pending HARQ retransmissions first, then one block
        of new RLC data on an idle process

        Returns
        -------
            List of TransportBlock transmitted in this slot
        """
        if not self.enabled:
            return []
        capacity = sample.slot_capacity_bits
        if capacity <= 0:
            return []
        sent = []
        retx_queue = self.harq.retx_queue
        while retx_queue and capacity > 0:
            proc = retx_queue.popleft()
            block = proc.block
            block.attempt += 1
            # incremental redundancy fits whatever is left of the slot
            capacity -= min(block.bits, capacity)
            self._transmit(proc, sample)
            sent.append(block)
        budget = capacity // 8
        if budget <= 0:
            return sent
        proc = self.harq.idle_process()
        if proc is None:
            self.deferred += 1
            return sent
        pdus = self.rlc_tx.on_grant(budget)
        if not pdus:
            return sent
        block = TransportBlock(8 * sum(p.size for p in pdus), pdus)
        proc.block = block
        self.harq.blocks += 1
        self._transmit(proc, sample)
        sent.append(block)
        return sent

    def _transmit(self, proc, sample):
        proc.state = AWAITING_FEEDBACK
        self.harq.transmissions += 1
        outcome = self.harq.decode(sample.snr_db, proc.block)
        self.sim.schedule_in(self.feedback_delay, self._feedback, proc,
                             outcome)

    def _feedback(self, proc, outcome):
        if not self.enabled:
            return
        block = proc.block
        action = self.harq.on_feedback(proc, outcome)
        if action == DELIVER:
            self.on_block_done(block.pdus, True)
            self.deliver(block.pdus)
        elif action == DROP:
            logger.debug('{}: block of {} bits dropped after {} attempts'
                         .format(self.label, block.bits, block.attempt))
            self.on_block_done(block.pdus, False)


def mac_slot_tick(mac, sample):
    return mac.slot_tick(sample)
