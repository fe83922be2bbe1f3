"""
Typed scenario configuration.

A ScenarioConfig is a set of frozen dataclass sections plus a few top-level
keys. Every key is addressed as ``section.field`` (or just ``field`` at top
level); its description lives in the dataclass field metadata so the key
registry, ``list-keys`` and the canonical text form are all derived from the
class definitions.
"""
import dataclasses
import hashlib
import math
import re
from dataclasses import dataclass, field


MB = 1024 * 1024


class ConfigError(ValueError):
    def __init__(self, key, message):
        """
        Invalid configuration entry

        Parameters
        ----------
        key: str
            Dotted key at fault, or None for whole-file syntax errors
        message: str
            Human readable reason
        """
        self.key = key
        if key is None:
            text = message
        else:
            text = '{}: {}'.format(key, message)
        super(ConfigError, self).__init__(text)


def _key(default, help, choices=None, kind=None):
    return field(default=default,
                 metadata={'help': help, 'choices': choices, 'kind': kind})


@dataclass(frozen=True)
class ChannelConfig:
    mode: str = _key('statistical', 'mmWave channel model',
                     ('statistical', 'geometric', 'stub'))
    band: str = _key('mm28', 'carrier of the primary mmWave link',
                     ('mm28', 'mm73'))
    a_out: float = _key(30.0, 'outage probability decay length [m]')
    b_out: float = _key(5.2, 'outage probability offset')
    a_los: float = _key(67.1, 'LOS probability decay length [m]')
    update_ms: float = _key(100.0, 'Markov state update period [ms]')
    sojourn_periods: float = _key(5.0, 'mean state sojourn in update periods')
    los_intercept_db: float = _key(61.4, 'LOS pathloss at 1 m [dB]')
    los_exponent: float = _key(2.0, 'LOS pathloss exponent')
    nlos_intercept_db: float = _key(72.0, 'NLOS pathloss at 1 m [dB]')
    nlos_exponent: float = _key(2.92, 'NLOS pathloss exponent')
    mm73_offset_db: float = _key(8.3, 'extra pathloss at 73 GHz [dB]')
    sigma_los_db: float = _key(5.8, 'LOS shadowing standard deviation [dB]')
    sigma_nlos_db: float = _key(8.7, 'NLOS shadowing standard deviation [dB]')


@dataclass(frozen=True)
class MmWaveConfig:
    bandwidth_hz: float = _key(1e9, 'mmWave bandwidth [Hz]')
    tx_power_dbm: float = _key(30.0, 'mmWave transmit power [dBm]')
    beam_gain_db: float = _key(30.0, 'combined beamforming gain [dB]')
    noise_figure_db: float = _key(5.0, 'receiver noise figure [dB]')
    slot_us: float = _key(125.0, 'TDD slot duration [us]')
    duty: float = _key(0.5, 'slot share of the data direction')
    overhead: float = _key(0.15, 'control and reference signal overhead')
    eff_cap: float = _key(7.5, 'spectral efficiency cap [bit/s/Hz]')
    mcs_floor_db: float = _key(-5.0, 'lowest decodable SNR [dB]')


@dataclass(frozen=True)
class LteConfig:
    bandwidth_hz: float = _key(20e6, 'LTE bandwidth [Hz]')
    dl_tx_power_dbm: float = _key(30.0, 'LTE downlink transmit power [dBm]')
    ul_tx_power_dbm: float = _key(25.0, 'LTE uplink transmit power [dBm]')
    dl_carrier_ghz: float = _key(2.1, 'LTE downlink carrier [GHz]')
    ul_carrier_ghz: float = _key(1.9, 'LTE uplink carrier [GHz]')
    uplink_mbps: float = _key(75.0, 'LTE uplink capacity [Mbit/s]')
    downlink_mbps: float = _key(150.0, 'LTE downlink capacity [Mbit/s]')
    latency_ms: float = _key(10.0, 'LTE one-way radio latency [ms]')
    slot_ms: float = _key(1.0, 'LTE subframe duration [ms]')


@dataclass(frozen=True)
class StubConfig:
    rate_mbps: float = _key(100.0, 'stub link rate [Mbit/s]')
    delay_ms: float = _key(5.0, 'stub link one-way delay [ms]')


@dataclass(frozen=True)
class HarqConfig:
    enabled: bool = _key(True, 'HARQ retransmissions at the MAC')
    max_tx: int = _key(4, 'transmissions per block including the first')
    processes: int = _key(8, 'parallel stop-and-wait processes')
    rtt_slots: int = _key(4, 'slots between transmission and feedback')
    bler1: float = _key(0.1, 'first-attempt block error rate')


@dataclass(frozen=True)
class RlcConfig:
    mode: str = _key('am', 'RLC mode', ('am', 'um'))
    max_retx: int = _key(5, 'AM retransmissions per PDU before RLF')
    window: int = _key(512, 'AM transmit window [PDUs]')
    sn_modulus: int = _key(1024, 'sequence number space')
    status_ms: float = _key(5.0, 'AM status report period [ms]')
    poll_ms: float = _key(20.0, 'AM poll retransmit timer [ms]')
    reordering_ms: float = _key(10.0, 'UM reordering timer [ms]')
    max_pdu_bytes: int = _key(0, 'cap on PDU size, 0 for one PDU per grant')


@dataclass(frozen=True)
class PdcpConfig:
    buffer_bytes: int = _key(20 * MB, 'bearer ingress buffer [bytes]')


@dataclass(frozen=True)
class CoreConfig:
    delay_ms: float = _key(1.0, 'core network one-way delay [ms]')


@dataclass(frozen=True)
class TcpConfig:
    cc: str = _key('cubic', 'single-path congestion control',
                   ('newreno', 'cubic'))
    mss: int = _key(1400, 'maximum segment size [bytes]')
    header_bytes: int = _key(40, 'TCP/IP header size [bytes]')
    init_cwnd_mss: int = _key(10, 'initial congestion window [MSS]')
    rwnd_bytes: int = _key(32 * MB, 'receive window [bytes]')
    min_rto_ms: float = _key(200.0, 'minimum RTO [ms]')
    initial_rto_ms: float = _key(1000.0, 'RTO before the first sample [ms]')
    max_rto_ms: float = _key(60000.0, 'maximum RTO [ms]')
    cubic_c: float = _key(0.4, 'CUBIC scaling constant')
    cubic_beta: float = _key(0.7, 'CUBIC multiplicative decrease')
    fast_convergence: bool = _key(True, 'CUBIC fast convergence')
    delayed_ack: bool = _key(False, 'acknowledge every second segment')
    delayed_ack_ms: float = _key(40.0, 'delayed ACK timer [ms]')
    spurious_rto_undo: bool = _key(
        True, 'undo a timeout that the timestamp echo shows spurious')


@dataclass(frozen=True)
class MptcpConfig:
    enabled: bool = _key(False, 'use multipath TCP')
    cc: str = _key('cubic', 'MP-TCP congestion control',
                   ('cubic', 'lia', 'olia', 'balia'))
    second_path: str = _key('none', 'access link of the second subflow',
                            ('none', 'lte', 'mm73'))
    second_path_start_ms: float = _key(500.0, 'second subflow start [ms]')


@dataclass(frozen=True)
class AppConfig:
    kind: str = _key('bulk', 'application model', ('bulk', 'download'))
    duration_s: float = _key(10.0, 'bulk transfer duration [s]')
    file_bytes: int = _key(0, 'download size [bytes]')
    max_duration_s: float = _key(120.0, 'download horizon [s]')


@dataclass(frozen=True)
class MobilityConfig:
    enabled: bool = _key(False, 'moving UE with obstacle blockage')
    enb: tuple = _key((-1.0, 20.0), 'eNB position [m]', kind='point')
    ue_start: tuple = _key((151.0, 0.0), 'UE start position [m]',
                           kind='point')
    ue_end: tuple = _key((151.0, 40.0), 'UE end position [m]', kind='point')
    speed_mps: float = _key(2.0, 'UE speed [m/s]')
    n_obstacles: int = _key(10, 'number of obstacles')
    region: tuple = _key((5.0, 145.0, 0.0, 40.0),
                         'obstacle area (min_x, max_x, min_y, max_y) [m]',
                         kind='rect')
    size_min: float = _key(2.0, 'smallest obstacle side [m]')
    size_max: float = _key(15.0, 'largest obstacle side [m]')
    update_ms: float = _key(10.0, 'blockage re-evaluation period [ms]')


SECTIONS = (
    ('channel', ChannelConfig),
    ('mmwave', MmWaveConfig),
    ('lte', LteConfig),
    ('stub', StubConfig),
    ('harq', HarqConfig),
    ('rlc', RlcConfig),
    ('pdcp', PdcpConfig),
    ('core', CoreConfig),
    ('tcp', TcpConfig),
    ('mptcp', MptcpConfig),
    ('app', AppConfig),
    ('mobility', MobilityConfig),
)


def _section(cls):
    return field(default_factory=cls, metadata={'section': True})


@dataclass(frozen=True)
class ScenarioConfig:
    label: str = _key('', 'free-form run label')
    distance_m: float = _key(100.0, 'UE to eNB distance [m]')
    direction: str = _key('uplink', 'direction of the data transfer',
                          ('uplink', 'downlink'))
    ack_path: str = _key('mmwave', 'link carrying downlink TCP ACKs',
                         ('mmwave', 'lte'))
    warmup_s: float = _key(2.0, 'start of the measured interval [s]')
    bin_s: float = _key(0.25, 'goodput time series bin [s]')
    seeds: tuple = _key(tuple(range(1, 21)), 'Monte Carlo seeds',
                        kind='ints')
    channel: ChannelConfig = _section(ChannelConfig)
    mmwave: MmWaveConfig = _section(MmWaveConfig)
    lte: LteConfig = _section(LteConfig)
    stub: StubConfig = _section(StubConfig)
    harq: HarqConfig = _section(HarqConfig)
    rlc: RlcConfig = _section(RlcConfig)
    pdcp: PdcpConfig = _section(PdcpConfig)
    core: CoreConfig = _section(CoreConfig)
    tcp: TcpConfig = _section(TcpConfig)
    mptcp: MptcpConfig = _section(MptcpConfig)
    app: AppConfig = _section(AppConfig)
    mobility: MobilityConfig = _section(MobilityConfig)

    def get(self, key):
        section, _, name = key.rpartition('.')
        owner = getattr(self, section) if section else self
        return getattr(owner, name)

    def to_text(self, seeds=True):
        """
        Canonical ``key = value`` text, parsed back to an equal config
        """
        lines = []
        for spec in config_keys():
            if spec.key == 'seeds' and not seeds:
                continue
            lines.append('{} = {}'.format(spec.key,
                                          format_value(self.get(spec.key))))
        return '\n'.join(lines) + '\n'

    @property
    def config_hash(self):
        text = self.to_text(seeds=False)
        return hashlib.sha1(text.encode('utf-8')).hexdigest()[:12]

    def with_values(self, values):
        """
        Copy with ``values`` (a mapping of dotted keys) applied and the
        result validated
        """
        cfg = _apply(self, values)
        validate(cfg)
        return cfg


@dataclass(frozen=True)
class KeySpec:
    key: str
    default: object
    type: type
    help: str
    choices: tuple
    kind: str


def _fields_of(cls, prefix):
    out = []
    for f in dataclasses.fields(cls):
        if f.metadata.get('section'):
            continue
        out.append(KeySpec(prefix + f.name, f.default, f.type,
                           f.metadata['help'], f.metadata['choices'],
                           f.metadata['kind']))
    return out


def config_keys():
    """
    Every configuration key in canonical order

    Returns
    -------
        list of KeySpec
    """
    keys = _fields_of(ScenarioConfig, '')
    for name, cls in SECTIONS:
        keys.extend(_fields_of(cls, name + '.'))
    return keys


_KEYS = {spec.key: spec for spec in config_keys()}
_WORD = re.compile(r'^[A-Za-z][A-Za-z0-9_.+-]*$')


def format_value(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            return ', '.join(str(v) for v in value)
        return '({})'.format(', '.join(format_value(v) for v in value))
    if isinstance(value, str):
        if _WORD.match(value) and value not in ('true', 'false'):
            return value
        return '"{}"'.format(value)
    return str(value)


def _number(key, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, 'expected a number, got {!r}'.format(value))
    return value


def coerce(key, value):
    """
    Convert a parsed value to the type of ``key``

    Raises
    ------
    ConfigError
        Unknown key or a value that does not fit the key's type or choices
    """
    spec = _KEYS.get(key)
    if spec is None:
        raise ConfigError(key, 'unknown key')
    if spec.kind == 'ints':
        items = value if isinstance(value, (list, tuple)) else [value]
        out = []
        for item in items:
            item = _number(key, item)
            if item != int(item):
                raise ConfigError(key, 'expected integers, got {!r}'
                                  .format(item))
            out.append(int(item))
        return tuple(out)
    if spec.kind in ('point', 'rect'):
        size = 2 if spec.kind == 'point' else 4
        if not isinstance(value, (list, tuple)) or len(value) != size:
            raise ConfigError(key, 'expected a tuple of {} numbers, got {!r}'
                              .format(size, value))
        return tuple(float(_number(key, v)) for v in value)
    if spec.type is bool:
        if not isinstance(value, bool):
            raise ConfigError(key, 'expected true or false, got {!r}'
                              .format(value))
        return value
    if spec.type is int:
        value = _number(key, value)
        if value != int(value):
            raise ConfigError(key, 'expected an integer, got {!r}'
                              .format(value))
        return int(value)
    if spec.type is float:
        value = float(_number(key, value))
        if not math.isfinite(value):
            raise ConfigError(key, 'expected a finite number')
        return value
    if not isinstance(value, str):
        raise ConfigError(key, 'expected a word, got {!r}'.format(value))
    if spec.choices is not None and value not in spec.choices:
        raise ConfigError(key, '{!r} is not one of {}'
                          .format(value, ', '.join(spec.choices)))
    return value


def _apply(cfg, values):
    top = {}
    sections = {}
    for key, value in values.items():
        value = coerce(key, value)
        section, _, name = key.rpartition('.')
        if section:
            sections.setdefault(section, {})[name] = value
        else:
            top[name] = value
    for section, changes in sections.items():
        top[section] = dataclasses.replace(getattr(cfg, section), **changes)
    return dataclasses.replace(cfg, **top)


def _check(ok, key, message):
    if not ok:
        raise ConfigError(key, message)


def validate(cfg):
    """
    Cross-key consistency rules; raises ConfigError naming the first key
    at fault
    """
    mp = cfg.mptcp
    _check(mp.second_path == 'none' or mp.enabled, 'mptcp.second_path',
           'a second path requires mptcp.enabled = true')
    _check(not mp.enabled or mp.second_path != 'none', 'mptcp.enabled',
           'multipath TCP needs mptcp.second_path')
    _check(not mp.enabled or cfg.channel.mode == 'statistical',
           'mptcp.enabled', 'multipath TCP runs on the statistical channel')
    _check(mp.second_path != cfg.channel.band, 'mptcp.second_path',
           'the second path must differ from channel.band')
    geometric = cfg.channel.mode == 'geometric'
    _check(cfg.mobility.enabled == geometric, 'mobility.enabled',
           'mobility and channel.mode = geometric go together')
    if cfg.ack_path == 'lte':
        _check(cfg.direction == 'downlink', 'ack_path',
               'ACKs on LTE need direction = downlink')
        _check(not mp.enabled, 'ack_path', 'ACKs on LTE exclude MP-TCP')
        _check(cfg.channel.mode != 'stub', 'ack_path',
               'ACKs on LTE need a mmWave channel')
    if cfg.app.kind == 'download':
        _check(cfg.app.file_bytes > 0, 'app.file_bytes',
               'a download needs a positive size')
    else:
        _check(cfg.app.duration_s > cfg.warmup_s, 'app.duration_s',
               'bulk duration must exceed warmup_s')
    _check(cfg.distance_m > 0, 'distance_m', 'must be positive')
    _check(cfg.warmup_s >= 0, 'warmup_s', 'must not be negative')
    _check(cfg.bin_s > 0, 'bin_s', 'must be positive')
    _check(len(cfg.seeds) > 0, 'seeds', 'at least one seed is required')
    _check(cfg.harq.max_tx >= 1, 'harq.max_tx', 'must be >= 1')
    _check(cfg.harq.processes >= 1, 'harq.processes', 'must be >= 1')
    _check(0.0 <= cfg.harq.bler1 < 1.0, 'harq.bler1', 'must lie in [0, 1)')
    _check(0.0 <= cfg.mmwave.duty <= 1.0, 'mmwave.duty', 'must lie in [0, 1]')
    _check(0.0 <= cfg.mmwave.overhead <= 1.0, 'mmwave.overhead',
           'must lie in [0, 1]')
    _check(2 * cfg.rlc.window <= cfg.rlc.sn_modulus, 'rlc.window',
           'must not exceed half of rlc.sn_modulus')
    _check(cfg.rlc.poll_ms >= 0, 'rlc.poll_ms', 'must not be negative')
    _check(cfg.pdcp.buffer_bytes > 0, 'pdcp.buffer_bytes', 'must be positive')
    _check(cfg.tcp.mss > 0, 'tcp.mss', 'must be positive')
    _check(cfg.tcp.init_cwnd_mss >= 1, 'tcp.init_cwnd_mss', 'must be >= 1')
    _check(cfg.tcp.rwnd_bytes >= cfg.tcp.mss, 'tcp.rwnd_bytes',
           'must hold at least one segment')
    _check(cfg.channel.sojourn_periods >= 1, 'channel.sojourn_periods',
           'must be >= 1')
    mob = cfg.mobility
    _check(0 < mob.size_min <= mob.size_max, 'mobility.size_min',
           'need 0 < size_min <= size_max')
    _check(mob.region[0] < mob.region[1] and mob.region[2] < mob.region[3],
           'mobility.region', 'need min_x < max_x and min_y < max_y')
    _check(mob.speed_mps >= 0, 'mobility.speed_mps', 'must not be negative')
    return cfg


def build_config(pairs):
    """
    ScenarioConfig from ``(key, value)`` pairs applied over the defaults
    """
    values = {}
    for key, value in pairs:
        if key in values:
            raise ConfigError(key, 'set more than once')
        values[key] = value
    return ScenarioConfig().with_values(values)
