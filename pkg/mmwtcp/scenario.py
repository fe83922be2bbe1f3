"""
Wiring of one simulated run: channels and bearers, the TCP or MP-TCP
endpoints on top, and the application measuring goodput.
"""
import collections
import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from .bearer import RadioLink, LteLink, StubLink, DelayLine, UPLINK, DOWNLINK
from .channel import StatisticalChannel, GeometricChannel
from .engine import Simulator
from .mptcp import MptcpConnection
from .results import RunResult, summarize
from .tcp import TcpSender, TcpReceiver, ByteStream, NewReno, Cubic
from .utils import seconds, ms, to_seconds


logger = logging.getLogger(__name__)

CORE = 'core'
LTE = 'lte'
STUB = 'stub'


@dataclass(frozen=True)
class RouteSpec:
    data: tuple
    ack: tuple


def _reverse(direction):
    return DOWNLINK if direction == UPLINK else UPLINK


def access_paths(cfg):
    """
    Access links carrying subflows, in subflow creation order
    """
    if cfg.channel.mode == 'stub':
        return [STUB]
    paths = [cfg.channel.band]
    if cfg.mptcp.enabled:
        paths.append(cfg.mptcp.second_path)
    return paths


def ack_path_wiring(cfg):
    """
    Route table of the run: for every access path the ``link:direction``
    hops traversed by data segments and by pure ACKs

    Data always uses the configured direction of its own path. Downlink
    ACKs of the primary mmWave path use the LTE uplink when
    ``ack_path = lte``.

    Returns
    -------
        OrderedDict mapping path name to RouteSpec
    """
    fwd = cfg.direction
    rev = _reverse(fwd)
    table = collections.OrderedDict()
    for path in access_paths(cfg):
        if path == STUB:
            table[path] = RouteSpec(('stub:' + fwd,), ('stub:' + rev,))
            continue
        radio_data = '{}:{}'.format(path, fwd)
        radio_ack = '{}:{}'.format(path, rev)
        if fwd == DOWNLINK and cfg.ack_path == 'lte' and path != LTE:
            radio_ack = 'lte:' + UPLINK
        if fwd == UPLINK:
            data = (radio_data, CORE + ':' + UPLINK)
            ack = (CORE + ':' + DOWNLINK, radio_ack)
        else:
            data = (CORE + ':' + DOWNLINK, radio_data)
            ack = (radio_ack, CORE + ':' + UPLINK)
        table[path] = RouteSpec(data, ack)
    return table


class Network(object):
    def __init__(self, sim, cfg):
        """
        Links named by ``ack_path_wiring``: the primary mmWave (or stub)
        link, an optional second access link, LTE when ACKs use it and the
        core network delay in both directions
        """
        self.sim = sim
        self.cfg = cfg
        self.links = collections.OrderedDict()
        buffer_bytes = cfg.pdcp.buffer_bytes
        core = ms(cfg.core.delay_ms)
        self.core = {UPLINK: DelayLine(sim, core, 'core/ul'),
                     DOWNLINK: DelayLine(sim, core, 'core/dl')}
        table = ack_path_wiring(cfg)
        names = {hop.split(':')[0] for spec in table.values()
                 for hop in spec.data + spec.ack}
        for name in access_paths(cfg) + sorted(names - set(access_paths(cfg))):
            if name == CORE or name in self.links:
                continue
            self.links[name] = self._build(name, buffer_bytes)
        self.table = table

    def _build(self, name, buffer_bytes):
        cfg = self.cfg
        sim = self.sim
        if name == STUB:
            return StubLink(sim, cfg.stub, buffer_bytes)
        if name == LTE:
            return LteLink(sim, cfg.lte, buffer_bytes)
        if cfg.channel.mode == 'geometric':
            channel = GeometricChannel(sim, cfg.channel, cfg.mmwave,
                                       cfg.mobility, name, name)
        else:
            channel = StatisticalChannel(sim, cfg.channel, cfg.mmwave, name,
                                         cfg.distance_m, name)
        return RadioLink(sim, channel, cfg, cfg.direction, label=name)

    def hop(self, name):
        link, direction = name.split(':')
        if link == CORE:
            return self.core[direction]
        return self.links[link].direction(direction)

    def route(self, names):
        return tuple(self.hop(name) for name in names)

    def bearer_hops(self):
        for link in self.links.values():
            yield link.uplink
            yield link.downlink

    def radio_links(self):
        return [link for link in self.links.values()
                if isinstance(link, RadioLink)]


class GoodputMeter(object):
    def __init__(self, sim, bin_s, n_subflows, warmup_s=0.0,
                 target_bytes=None):
        """
        Application sink: counts in-order payload bytes per subflow and per
        time bin, stopping the run once ``target_bytes`` have arrived
        """
        self.sim = sim
        self.bin = seconds(bin_s)
        self.warmup = seconds(warmup_s)
        self.target = target_bytes
        self.total = 0
        self.measured = [0] * n_subflows
        self.bins = [collections.defaultdict(int) for _ in range(n_subflows)]
        self.completed_at = None

    def on_data(self, chunks):
        now = self.sim.now
        idx = now // self.bin
        counted = now >= self.warmup
        for _, length, flow in chunks:
            self.total += length
            self.bins[flow][idx] += length
            if counted:
                self.measured[flow] += length
        if self.target is not None and self.completed_at is None and \
                self.total >= self.target:
            self.completed_at = now
            self.sim.stop()

    def timeseries(self, end, bin_s):
        n_bins = int(math.ceil(end / self.bin - 1e-9))
        rows = []
        scale = 8.0 / bin_s
        for flow, counts in enumerate(self.bins):
            values = np.zeros(n_bins)
            for idx, nbytes in counts.items():
                if idx < n_bins:
                    values[idx] = nbytes * scale
            rows.append(pd.DataFrame({'t_s': np.arange(n_bins) * bin_s,
                                      'goodput_bps': values,
                                      'subflow_id': flow}))
        ts = pd.concat(rows, ignore_index=True)
        return ts.sort_values(['t_s', 'subflow_id'],
                              kind='mergesort').reset_index(drop=True)


def _make_cc(tcp_cfg):
    if tcp_cfg.cc == 'newreno':
        return NewReno()
    return Cubic(tcp_cfg.cubic_c, tcp_cfg.cubic_beta, tcp_cfg.fast_convergence)


def run_scenario(cfg, seed):
    """
    Simulate one run of ``cfg`` with root seed ``seed``

    Parameters
    ----------
    cfg: ScenarioConfig
        Validated configuration
    seed: int
        Root seed of every random stream of the run

    Returns
    -------
        RunResult
    """
    sim = Simulator(seed)
    net = Network(sim, cfg)
    download = cfg.app.kind == 'download'
    warmup = 0.0 if download else cfg.warmup_s
    horizon = cfg.app.max_duration_s if download else cfg.app.duration_s
    paths = list(net.table)
    meter = GoodputMeter(sim, cfg.bin_s, len(paths), warmup,
                         cfg.app.file_bytes if download else None)
    source = ByteStream(cfg.app.file_bytes if download else None)
    meta = None
    if cfg.mptcp.enabled:
        meta = MptcpConnection(sim, cfg.mptcp, cfg.tcp, source,
                               meter.on_data)
    subflows = []
    for flow, path in enumerate(paths):
        spec = net.table[path]
        sender = TcpSender(sim, _make_cc(cfg.tcp), cfg.tcp, flow, None,
                           source=source, label='tcp/' + path)
        receiver = TcpReceiver(sim, cfg.tcp, flow, None, meter.on_data,
                               label='tcp-rx/' + path)
        sender.route = net.route(spec.data) + (receiver,)
        receiver.ack_route = net.route(spec.ack) + (sender,)
        if meta is not None:
            subflows.append(meta.add_subflow(path, sender, receiver))
        else:
            subflows.append(sender)
    if meta is None:
        sim.schedule(0, subflows[0].pump)
    else:
        sim.schedule(0, meta.start_subflow, subflows[0])
        for sf in subflows[1:]:
            sim.schedule(ms(cfg.mptcp.second_path_start_ms),
                         meta.start_subflow, sf)
        for name, link in net.links.items():
            if isinstance(link, RadioLink):
                link.listeners.append(
                    lambda failed, name=name: meta.on_path_failed(name))
    for hop in net.bearer_hops():
        hop.stats.measure_from = seconds(warmup)

    logger.info('Running {} seed {}: {} for {:.1f} s'
                .format(cfg.config_hash, seed, '+'.join(paths), horizon))
    sim.run(seconds(horizon))
    end = sim.now
    logger.info('Finished {} seed {} at {:.3f} s after {} events'
                .format(cfg.config_hash, seed, to_seconds(end),
                        sim.executed))
    return _collect(cfg, seed, net, meter, paths, end, warmup)


def _collect(cfg, seed, net, meter, paths, end, warmup):
    measured_s = to_seconds(end) - warmup
    measured_bytes = sum(meter.measured)
    if measured_s > 0:
        goodput = measured_bytes * 8.0 / measured_s
        contributions = {i: b * 8.0 / measured_s
                         for i, b in enumerate(meter.measured)}
    else:
        goodput = 0.0
        contributions = {i: 0.0 for i in range(len(paths))}

    data_hops = set()
    for spec in net.table.values():
        for name in spec.data:
            hop = net.hop(name)
            if hasattr(hop, 'stats'):
                data_hops.add(hop)
    lat_sum = sum(h.stats.latency_sum for h in data_hops)
    lat_count = sum(h.stats.latency_count for h in data_hops)
    latency = lat_sum / lat_count / 1e9 if lat_count else float('nan')

    counters = {}
    for hop in net.bearer_hops():
        for name, value in hop.stats.as_dict().items():
            counters['{}.{}'.format(hop.label, name)] = value
        harq = getattr(hop, 'harq', None)
        if harq is not None:
            counters[hop.label + '.harq_residual'] = harq.residual_drops
    rlf_links = [link for link in net.radio_links() if link.failed]
    rlf_time = (min(to_seconds(link.failed_at) for link in rlf_links)
                if rlf_links else float('nan'))

    download_time = float('nan')
    if meter.completed_at is not None:
        download_time = to_seconds(meter.completed_at)

    return RunResult(
        config_hash=cfg.config_hash,
        seed=seed,
        goodput_mean_bps=goodput,
        latency_mean_s=latency,
        download_time_s=download_time,
        rlf=bool(rlf_links),
        rlf_time_s=rlf_time,
        delivered_bytes=measured_bytes,
        measured_s=measured_s,
        contributions=contributions,
        subflow_paths=tuple(paths),
        timeseries=meter.timeseries(end, cfg.bin_s),
        counters=counters,
    )


def _resolve_seeds(cfg, seeds):
    seeds = tuple(cfg.seeds if seeds is None else seeds)
    if not seeds:
        raise ValueError('At least one seed is required')
    return seeds


def run_many(configs, seeds=None, parallel=1):
    """
    Run every config over its seeds

    Parameters
    ----------
    configs: list
        ScenarioConfig objects, results keep this order
    seeds: list
        Seeds used for every config, defaults to each config's own seeds
    parallel: int
        Worker processes; results are merged in (config, seed) order
        whatever order they finish in

    Returns
    -------
        List of ``(cfg, [RunResult, ...])`` tuples
    """
    jobs = [(cfg, seed) for cfg in configs
            for seed in _resolve_seeds(cfg, seeds)]
    if parallel > 1 and len(jobs) > 1:
        flat = Parallel(n_jobs=parallel)(
            delayed(run_scenario)(cfg, seed) for cfg, seed in jobs)
    else:
        flat = [run_scenario(cfg, seed) for cfg, seed in jobs]
    out = []
    pos = 0
    for cfg in configs:
        n = len(_resolve_seeds(cfg, seeds))
        out.append((cfg, flat[pos:pos + n]))
        pos += n
        logger.info('{} {}: {} runs done'.format(cfg.config_hash, cfg.label,
                                                 n))
    return out


def monte_carlo(cfg, seeds=None, parallel=1):
    """
    Mean and standard error of the run metrics of ``cfg`` across seeds

    Returns
    -------
        SummaryRow
    """
    (_, runs), = run_many([cfg], seeds, parallel)
    return summarize(cfg, runs)
