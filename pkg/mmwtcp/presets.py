"""
Parameter sweeps of the standard experiments, each a list of ScenarioConfig
"""
import collections

from .config import ScenarioConfig, MB


DISTANCES = (50.0, 75.0, 100.0, 150.0)

# name, harq.enabled, rlc.mode
RETX_STACKS = (
    ('HARQ+AM', True, 'am'),
    ('HARQ+UM', True, 'um'),
    ('noHARQ+UM', False, 'um'),
)

FILE_SIZES = (1000000, 5000000, 10000000)
SMALL_AND_LARGE_FILES = (100000, 500000, 1000000, 5000000, 10000000)

# name, second path, cc
MPTCP_SERIES = (
    ('SP-CUBIC', 'none', 'cubic'),
    ('LTE+28 CUBIC', 'lte', 'cubic'),
    ('LTE+28 BALIA', 'lte', 'balia'),
    ('28+73 CUBIC', 'mm73', 'cubic'),
    ('28+73 BALIA', 'mm73', 'balia'),
)


def _make(label, values):
    values = dict(values)
    values['label'] = label
    return ScenarioConfig().with_values(values)


def _mptcp_values(second_path, cc):
    if second_path == 'none':
        return {'tcp.cc': cc}
    return {'mptcp.enabled': True, 'mptcp.second_path': second_path,
            'mptcp.cc': cc}


def fig_retx():
    """
    Uplink bulk goodput for each retransmission stack and distance
    """
    return [_make('retx d={:g} {}'.format(d, name),
                  {'distance_m': d, 'harq.enabled': harq, 'rlc.mode': mode})
            for d in DISTANCES for name, harq, mode in RETX_STACKS]


def fig_retx_latency():
    return [_make('retx-latency d={:g} {}'.format(d, name),
                  {'distance_m': d, 'harq.enabled': harq, 'rlc.mode': mode})
            for d in DISTANCES for name, harq, mode in RETX_STACKS]


def fig_wget():
    """
    Upload of files hosted at the UE, with and without lower-layer
    retransmissions
    """
    stacks = [s for s in RETX_STACKS if s[0] in ('HARQ+AM', 'noHARQ+UM')]
    return [_make('wget {}B d={:g} {}'.format(size, d, name),
                  {'distance_m': d, 'harq.enabled': harq, 'rlc.mode': mode,
                   'app.kind': 'download', 'app.file_bytes': size})
            for size in FILE_SIZES for d in DISTANCES
            for name, harq, mode in stacks]


def fig_mptcp():
    return [_make('mptcp d={:g} {}'.format(d, name),
                  dict(_mptcp_values(path, cc), distance_m=d))
            for d in DISTANCES for name, path, cc in MPTCP_SERIES]


def fig_contrib():
    """
    Per-subflow split of MP-TCP CUBIC goodput at long distances
    """
    return [_make('contrib d={:g} {}'.format(d, path),
                  dict(_mptcp_values(path, 'cubic'), distance_m=d))
            for d in (100.0, 150.0) for path in ('lte', 'mm73')]


def fig_trace():
    return [_make('trace {}'.format(cc),
                  dict(_mptcp_values('lte', cc), distance_m=50.0,
                       **{'app.duration_s': 20.0}))
            for cc in ('olia', 'balia', 'cubic')]


def fig_ackpath():
    """
    Downlink to a moving UE behind obstacles, ACKs on LTE or on the mmWave
    uplink, for two bearer buffer sizes

    The remote host sits 10 ms behind the core, which puts the
    bandwidth-delay product of the LOS link between the two buffer sizes.
    """
    configs = []
    for buffer_mb in (2, 20):
        for speed in (2.0, 5.0):
            travel = 40.0 / speed
            for ack_path in ('lte', 'mmwave'):
                configs.append(_make(
                    'ackpath {}MB {:g}m/s ack={}'.format(buffer_mb, speed,
                                                         ack_path),
                    {'direction': 'downlink', 'ack_path': ack_path,
                     'channel.mode': 'geometric', 'mobility.enabled': True,
                     'mobility.speed_mps': speed, 'core.delay_ms': 10.0,
                     'pdcp.buffer_bytes': buffer_mb * MB,
                     'app.duration_s': travel}))
    return configs


def fig_wget_mptcp():
    return [_make('wget-mptcp {}B d={:g} {}'.format(size, d, path),
                  dict(_mptcp_values(path, 'cubic'), distance_m=d,
                       **{'app.kind': 'download', 'app.file_bytes': size}))
            for size in SMALL_AND_LARGE_FILES for d in DISTANCES
            for path in ('lte', 'mm73')]


def fig_wget_cc():
    return [_make('wget-cc {}B d={:g} {}'.format(size, d, cc),
                  dict(_mptcp_values('lte', cc), distance_m=d,
                       **{'app.kind': 'download', 'app.file_bytes': size}))
            for size in SMALL_AND_LARGE_FILES for d in DISTANCES
            for cc in ('cubic', 'balia')]


PRESETS = collections.OrderedDict([
    ('fig-retx', fig_retx),
    ('fig-retx-latency', fig_retx_latency),
    ('fig-wget', fig_wget),
    ('fig-mptcp', fig_mptcp),
    ('fig-contrib', fig_contrib),
    ('fig-trace', fig_trace),
    ('fig-ackpath', fig_ackpath),
    ('fig-wget-mptcp', fig_wget_mptcp),
    ('fig-wget-cc', fig_wget_cc),
])


def preset(name):
    """
    Configs of the sweep ``name``

    Raises
    ------
    ValueError
        Unknown preset name
    """
    try:
        build = PRESETS[name]
    except KeyError:
        raise ValueError('Unknown preset {!r}, expected one of {}'
                         .format(name, ', '.join(PRESETS)))
    return build()
