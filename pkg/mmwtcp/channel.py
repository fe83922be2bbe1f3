"""
Link quality models: a distance-driven LOS/NLOS/outage Markov channel, a
geometric blockage channel for a moving UE, and a fixed-capacity LTE link.
"""
import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from .engine import SimulationError
from .utils import ms, us, db_to_linear


logger = logging.getLogger(__name__)

# 20*log10(73/28), rounded
MM73_OFFSET_DB = 8.3


class LinkState(enum.IntEnum):
    LOS = 0
    NLOS = 1
    OUTAGE = 2


class Band(enum.Enum):
    MM28 = 'mm28'
    MM73 = 'mm73'


@dataclass(frozen=True)
class StateDistribution:
    p_los: float
    p_nlos: float
    p_out: float

    def __post_init__(self):
        for name in ('p_los', 'p_nlos', 'p_out'):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError('{} must lie in [0, 1], got {!r}'
                                 .format(name, p))
        total = self.p_los + self.p_nlos + self.p_out
        if abs(total - 1.0) > 1e-9:
            raise ValueError('State probabilities sum to {!r}, expected 1'
                             .format(total))

    def as_array(self):
        return np.array([self.p_los, self.p_nlos, self.p_out])


@dataclass(frozen=True)
class ChannelSample:
    state: LinkState
    pathloss_db: float
    snr_db: float
    spectral_eff: float
    slot_capacity_bits: int


@dataclass(frozen=True)
class Obstacle:
    min_x: float
    max_x: float
    min_y: float
    max_y: float

    def __post_init__(self):
        if not (self.min_x < self.max_x and self.min_y < self.max_y):
            raise ValueError('Degenerate rectangle {!r}'.format(self))

    def overlaps(self, other):
        # shared edges do not count as overlap
        return (self.min_x < other.max_x and other.min_x < self.max_x and
                self.min_y < other.max_y and other.min_y < self.max_y)

    def contains(self, other):
        return (self.min_x <= other.min_x and other.max_x <= self.max_x and
                self.min_y <= other.min_y and other.max_y <= self.max_y)


@dataclass
class MobilityState:
    position: tuple
    velocity: tuple

    def position_at(self, t):
        """
        Position after ``t`` seconds of straight-line motion
        """
        return (self.position[0] + self.velocity[0] * t,
                self.position[1] + self.velocity[1] * t)


def state_probabilities(d, a_out=30.0, b_out=5.2, a_los=67.1):
    """
    Distance dependent probabilities of LOS, NLOS and outage

    Parameters
    ----------
    d: float
        Distance between UE and eNB in meters, strictly positive
    a_out, b_out: float
        Outage decay length and offset
    a_los: float
        LOS decay length in meters

    Returns
    -------
        StateDistribution
    """
    if d <= 0:
        raise ValueError('Distance must be positive, got {!r}'.format(d))
    p_out = max(0.0, 1.0 - math.exp(-d / a_out + b_out))
    p_los = (1.0 - p_out) * math.exp(-d / a_los)
    p_nlos = max(0.0, 1.0 - p_out - p_los)
    return StateDistribution(p_los, p_nlos, p_out)


def build_transition_matrix(dist, mean_sojourn_periods):
    """
    First-order Markov chain over (LOS, NLOS, OUTAGE) whose stationary
    distribution is ``dist``.

    Each period the chain keeps its state with probability
    ``q = 1 - 1/mean_sojourn_periods`` and otherwise redraws it from
    ``dist``, so the off-diagonal mass of a row is proportional to the
    stationary probabilities of the other states. States with zero
    probability are unreachable; a chain sitting in one leaves it on the
    next step.
    """
    if mean_sojourn_periods < 1:
        raise ValueError('mean_sojourn_periods must be >= 1, got {!r}'
                         .format(mean_sojourn_periods))
    pi = dist.as_array()
    q = 1.0 - 1.0 / mean_sojourn_periods
    matrix = np.empty((3, 3))
    for i in range(3):
        if pi[i] == 0.0:
            matrix[i] = pi
        else:
            matrix[i] = (1.0 - q) * pi
            matrix[i, i] += q
    return matrix


def pathloss_db(state, d, band=Band.MM28, shadow_draw=0.0,
                los_intercept_db=61.4, los_exponent=2.0,
                nlos_intercept_db=72.0, nlos_exponent=2.92,
                mm73_offset_db=MM73_OFFSET_DB):
    """
    Log-distance pathloss of a LOS or NLOS link

    Parameters
    ----------
    state: LinkState
        LOS or NLOS, outage has no pathloss
    d: float
        Distance in meters
    band: Band
        Carrier, 73 GHz adds a constant offset to the 28 GHz fit
    shadow_draw: float
        Shadowing realization in dB
    """
    if d <= 0:
        raise ValueError('Distance must be positive, got {!r}'.format(d))
    state = LinkState(state)
    if state == LinkState.OUTAGE:
        raise ValueError('Outage has no pathloss')
    if state == LinkState.LOS:
        pl = los_intercept_db + 10.0 * los_exponent * math.log10(d)
    else:
        pl = nlos_intercept_db + 10.0 * nlos_exponent * math.log10(d)
    if Band(band) == Band.MM73:
        pl += mm73_offset_db
    return pl + shadow_draw


def noise_floor_dbm(bandwidth_hz, noise_figure_db):
    return -174.0 + 10.0 * math.log10(bandwidth_hz) + noise_figure_db


def snr_db(pl, tx_power_dbm=30.0, beam_gain_db=30.0, noise_figure_db=5.0,
           bandwidth_hz=1e9):
    return (tx_power_dbm + beam_gain_db - pl -
            noise_floor_dbm(bandwidth_hz, noise_figure_db))


def spectral_efficiency(snr, eff_cap=7.5, mcs_floor_db=-5.0):
    if snr < mcs_floor_db:
        return 0.0
    return min(math.log2(1.0 + db_to_linear(snr)), eff_cap)


def slot_capacity(snr, slot, duty, overhead, bandwidth_hz=1e9, eff_cap=7.5,
                  mcs_floor_db=-5.0):
    """
    Bits deliverable in one slot

    Parameters
    ----------
    snr: float
        SNR in dB
    slot: float
        Slot duration in seconds
    duty: float
        Fraction of the slot given to the measured direction
    overhead: float
        Fraction lost to control and reference signals
    """
    if not (0.0 <= duty <= 1.0 and 0.0 <= overhead <= 1.0):
        raise ValueError('duty and overhead must lie in [0, 1]')
    eff = spectral_efficiency(snr, eff_cap, mcs_floor_db)
    if eff == 0.0:
        return 0
    bits = bandwidth_hz * slot * duty * (1.0 - overhead) * eff
    return int(math.floor(bits + 1e-9))


def _segment_hits_rectangle(p0, p1, rect):
    # Liang-Barsky clipping of p0 + t*(p1 - p0) against a closed rectangle
    dx = p1[0] - p0[0]
    dy = p1[1] - p0[1]
    t0, t1 = 0.0, 1.0
    for p, q in ((-dx, p0[0] - rect.min_x), (dx, rect.max_x - p0[0]),
                 (-dy, p0[1] - rect.min_y), (dy, rect.max_y - p0[1])):
        if p == 0.0:
            if q < 0.0:
                return False
            continue
        r = q / p
        if p < 0.0:
            if r > t1:
                return False
            t0 = max(t0, r)
        else:
            if r < t0:
                return False
            t1 = min(t1, r)
    # open segment: endpoints alone do not block
    return t0 <= t1 and t1 > 0.0 and t0 < 1.0


def geometric_state(ue, enb, obstacles):
    """
    NLOS when the segment between UE and eNB crosses any obstacle
    """
    if tuple(ue) == tuple(enb):
        raise ValueError('UE and eNB positions coincide')
    for rect in obstacles:
        if _segment_hits_rectangle(ue, enb, rect):
            return LinkState.NLOS
    return LinkState.LOS


def deploy_obstacles(rng, n, region, size_bounds=(2.0, 15.0),
                     max_attempts=10000):
    """
    Place ``n`` pairwise non-overlapping rectangles inside ``region`` by
    rejection sampling

    Parameters
    ----------
    rng: RngStream
    n: int
        Number of obstacles
    region: Obstacle
        Bounding rectangle of the deployment area
    size_bounds: tuple
        (min, max) side length in meters, drawn uniformly per axis
    """
    lo, hi = size_bounds
    placed = []
    attempts = 0
    while len(placed) < n:
        attempts += 1
        if attempts > max_attempts:
            logger.warning('Placed {} of {} obstacles after {} attempts'
                           .format(len(placed), n, max_attempts))
            raise SimulationError('Could not place {} non-overlapping '
                                  'obstacles in {!r}'.format(n, region))
        w = rng.uniform_range(lo, hi)
        h = rng.uniform_range(lo, hi)
        if w >= region.max_x - region.min_x or h >= region.max_y - region.min_y:
            continue
        x = rng.uniform_range(region.min_x, region.max_x - w)
        y = rng.uniform_range(region.min_y, region.max_y - h)
        cand = Obstacle(x, x + w, y, y + h)
        if any(cand.overlaps(other) for other in placed):
            continue
        placed.append(cand)
    return placed


def lte_sample(direction, slot=1e-3, uplink_mbps=75.0, downlink_mbps=150.0,
               bandwidth_hz=20e6):
    """
    Fixed-capacity, loss-free LTE link abstraction
    """
    if direction == 'uplink':
        rate = uplink_mbps * 1e6
    elif direction == 'downlink':
        rate = downlink_mbps * 1e6
    else:
        raise ValueError('Unknown direction {!r}'.format(direction))
    bits = int(math.floor(rate * slot + 1e-9))
    return ChannelSample(LinkState.LOS, float('nan'), float('nan'),
                         rate / bandwidth_hz, bits)


class _MmWaveChannel(object):
    """
    Shared per-link state: current LinkState, block shadowing and a cache
    of per-direction samples refreshed whenever the state or distance
    changes
    """

    def __init__(self, sim, channel_cfg, mmwave_cfg, band, label):
        self.sim = sim
        self.ccfg = channel_cfg
        self.mcfg = mmwave_cfg
        self.band = Band(band)
        self.label = label
        self._shadow_rng = sim.stream('shadowing/' + label)
        self.state = None
        self.distance = None
        self.shadow = 0.0
        self._samples = {}
        self.history = []

    def _set_state(self, state, distance):
        state = LinkState(state)
        if state != self.state:
            if state == LinkState.LOS:
                self.shadow = self._shadow_rng.normal(self.ccfg.sigma_los_db)
            elif state == LinkState.NLOS:
                self.shadow = self._shadow_rng.normal(self.ccfg.sigma_nlos_db)
            else:
                self.shadow = 0.0
            self.history.append((self.sim.now, state))
        self.state = state
        self.distance = distance
        self._samples = {}

    def sample(self, duty):
        """
        ChannelSample for a direction holding ``duty`` of each slot
        """
        cached = self._samples.get(duty)
        if cached is not None:
            return cached
        m = self.mcfg
        if self.state == LinkState.OUTAGE:
            cached = ChannelSample(self.state, float('inf'), float('-inf'),
                                   0.0, 0)
        else:
            c = self.ccfg
            pl = pathloss_db(self.state, self.distance, self.band, self.shadow,
                             c.los_intercept_db, c.los_exponent,
                             c.nlos_intercept_db, c.nlos_exponent,
                             c.mm73_offset_db)
            snr = snr_db(pl, m.tx_power_dbm, m.beam_gain_db,
                         m.noise_figure_db, m.bandwidth_hz)
            eff = spectral_efficiency(snr, m.eff_cap, m.mcs_floor_db)
            bits = slot_capacity(snr, m.slot_us * 1e-6, duty, m.overhead,
                                 m.bandwidth_hz, m.eff_cap, m.mcs_floor_db)
            cached = ChannelSample(self.state, pl, snr, eff, bits)
        self._samples[duty] = cached
        return cached


class StatisticalChannel(_MmWaveChannel):
    def __init__(self, sim, channel_cfg, mmwave_cfg, band, distance, label):
        """
        Markov LOS/NLOS/outage channel at a fixed distance, stepped once per
        ``channel_cfg.update_ms``
        """
        super(StatisticalChannel, self).__init__(sim, channel_cfg,
                                                 mmwave_cfg, band, label)
        self._rng = sim.stream('channel/' + label)
        c = channel_cfg
        self.dist = state_probabilities(distance, c.a_out, c.b_out, c.a_los)
        self.matrix = build_transition_matrix(self.dist, c.sojourn_periods)
        first = self._rng.choice_index(self.dist.as_array())
        self._set_state(first, distance)
        self._period = ms(c.update_ms)
        sim.schedule_in(self._period, self._step)

    def _step(self):
        row = self.matrix[int(self.state)]
        nxt = self._rng.choice_index(row)
        if nxt != self.state:
            self._set_state(nxt, self.distance)
        self.sim.schedule_in(self._period, self._step)


class GeometricChannel(_MmWaveChannel):
    def __init__(self, sim, channel_cfg, mmwave_cfg, mobility_cfg, band,
                 label):
        """
        LOS/NLOS decided by obstacles between a fixed eNB and a UE moving on
        a straight line; the UE stops at the end point
        """
        super(GeometricChannel, self).__init__(sim, channel_cfg, mmwave_cfg,
                                               band, label)
        mob = mobility_cfg
        self.enb = tuple(mob.enb)
        start = tuple(mob.ue_start)
        end = tuple(mob.ue_end)
        length = math.hypot(end[0] - start[0], end[1] - start[1])
        if length > 0:
            vel = ((end[0] - start[0]) / length * mob.speed_mps,
                   (end[1] - start[1]) / length * mob.speed_mps)
        else:
            vel = (0.0, 0.0)
        self.mobility = MobilityState(start, vel)
        self.travel_s = length / mob.speed_mps if mob.speed_mps > 0 else 0.0
        region = Obstacle(*mob.region)
        self.obstacles = deploy_obstacles(sim.stream('obstacles'),
                                          mob.n_obstacles, region,
                                          (mob.size_min, mob.size_max))
        self._period = ms(mob.update_ms)
        self._refresh()

    def ue_position(self):
        t = min(self.sim.now_s, self.travel_s)
        return self.mobility.position_at(t)

    def _refresh(self):
        ue = self.ue_position()
        state = geometric_state(ue, self.enb, self.obstacles)
        d = math.hypot(ue[0] - self.enb[0], ue[1] - self.enb[1])
        self._set_state(state, d)
        self.sim.schedule_in(self._period, self._refresh)


class LteChannel(object):
    def __init__(self, lte_cfg):
        self.cfg = lte_cfg
        self._samples = {
            direction: lte_sample(direction, lte_cfg.slot_ms * 1e-3,
                                  lte_cfg.uplink_mbps, lte_cfg.downlink_mbps,
                                  lte_cfg.bandwidth_hz)
            for direction in ('uplink', 'downlink')
        }

    def sample(self, direction):
        return self._samples[direction]


def slot_ticks(mmwave_cfg):
    return us(mmwave_cfg.slot_us)
