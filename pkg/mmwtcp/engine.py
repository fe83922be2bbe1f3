"""
Deterministic discrete-event engine.

Time is an integer number of nanoseconds. Events at equal timestamps run in
insertion order. Random numbers come from labelled streams derived from a
single root seed, so draws made by one subsystem never shift the sequence
seen by another.
"""
import hashlib
import heapq
import logging

import numpy as np

from .utils import to_seconds


logger = logging.getLogger(__name__)


class SimulationError(RuntimeError):
    """
    Contract violation detected while a simulation is running
    """


class Simulator(object):
    def __init__(self, root_seed=0):
        """
        Create an event loop with its clock at zero

        Parameters
        ----------
        root_seed: int
            64-bit seed from which every RngStream of the run is derived
        """
        self.root_seed = int(root_seed)
        self._now = 0
        self._seq = 0
        self._heap = []
        self._live = {}
        self._streams = {}
        self._stopped = False
        self.scheduled = 0
        self.cancelled = 0
        self.executed = 0

    @property
    def now(self):
        """
        Current simulation time in integer nanoseconds
        """
        return self._now

    @property
    def now_s(self):
        return to_seconds(self._now)

    def schedule(self, at, action, *args):
        """
        Enqueue ``action(*args)`` to execute at absolute time ``at``

        Parameters
        ----------
        at: int
            Absolute firing time in nanoseconds, must not lie in the past
        action: callable
            Called with ``args`` when the event fires

        Returns
        -------
            Event id usable with cancel()
        """
        at = int(at)
        if at < self._now:
            raise SimulationError('Cannot schedule {!r} at t={} ns, clock is '
                                  'already at {} ns'.format(action, at,
                                                            self._now))
        seq = self._seq
        self._seq += 1
        entry = [at, seq, action, args]
        heapq.heappush(self._heap, entry)
        self._live[seq] = entry
        self.scheduled += 1
        return seq

    def schedule_in(self, delay, action, *args):
        return self.schedule(self._now + delay, action, *args)

    def cancel(self, event_id):
        """
        Cancel a pending event. Cancelling an event that already ran or was
        already cancelled is a no-op and returns False.
        """
        entry = self._live.pop(event_id, None)
        if entry is None:
            return False
        entry[2] = None
        self.cancelled += 1
        return True

    def pending(self):
        return len(self._live)

    def run(self, until):
        """
        Execute every event with ``fire_at <= until`` in (fire_at, seq)
        order, then leave the clock at ``until``

        Returns
        -------
            Number of events executed by this call
        """
        until = int(until)
        heap = self._heap
        live = self._live
        count = 0
        self._stopped = False
        while heap and heap[0][0] <= until:
            at, seq, action, args = heapq.heappop(heap)
            if action is None:
                continue
            del live[seq]
            self._now = at
            action(*args)
            count += 1
            if self._stopped:
                break
        if until > self._now and not self._stopped:
            self._now = until
        self.executed += count
        return count

    def stop(self):
        """
        Make the running ``run()`` return after the current event, leaving
        the clock at that event's time
        """
        self._stopped = True

    @property
    def stopped(self):
        return self._stopped

    def stream(self, label):
        """
        Return the RngStream for ``label``, creating it on first use
        """
        rng = self._streams.get(label)
        if rng is None:
            rng = RngStream(self.root_seed, label)
            self._streams[label] = rng
        return rng


def _label_key(label):
    digest = hashlib.sha256(label.encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'little')


class RngStream(object):
    _BLOCK = 4096

    def __init__(self, root_seed, stream_label):
        """
        Independent random stream fully determined by
        ``(root_seed, stream_label)``

        Parameters
        ----------
        root_seed: int
            64-bit run seed
        stream_label: str
            Short subsystem name, e.g. "channel/mm28" or "harq/mm28/ul"
        """
        self.root_seed = int(root_seed)
        self.stream_label = stream_label
        seq = np.random.SeedSequence([self.root_seed & 0xFFFFFFFFFFFFFFFF,
                                      _label_key(stream_label)])
        self._gen = np.random.Generator(np.random.PCG64(seq))
        self._block = self._gen.random(self._BLOCK)
        self._pos = 0

    def uniform(self):
        """
        Next real in [0, 1)
        """
        if self._pos == self._BLOCK:
            self._block = self._gen.random(self._BLOCK)
            self._pos = 0
        value = self._block[self._pos]
        self._pos += 1
        return float(value)

    def normal(self, sigma):
        return float(self._gen.normal(0.0, sigma))

    def uniform_range(self, low, high):
        return low + (high - low) * self.uniform()

    def choice_index(self, probabilities):
        """
        Index drawn from a discrete distribution by inverse CDF
        """
        u = self.uniform()
        acc = 0.0
        last = 0
        for i, p in enumerate(probabilities):
            if p <= 0.0:
                continue
            last = i
            acc += p
            if u < acc:
                return i
        return last


def rng_uniform(stream):
    return stream.uniform()
