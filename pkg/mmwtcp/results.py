"""
Run results, Monte Carlo summaries and their CSV form.
"""
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd


logger = logging.getLogger(__name__)

SUMMARY_KEYS = [
    ('label', 'label'),
    ('direction', 'direction'),
    ('distance_m', 'distance_m'),
    ('channel_mode', 'channel.mode'),
    ('rlc_mode', 'rlc.mode'),
    ('harq_enabled', 'harq.enabled'),
    ('tcp_cc', 'tcp.cc'),
    ('mptcp_cc', 'mptcp.cc'),
    ('second_path', 'mptcp.second_path'),
    ('ack_path', 'ack_path'),
    ('buffer_bytes', 'pdcp.buffer_bytes'),
    ('speed_mps', 'mobility.speed_mps'),
    ('app_kind', 'app.kind'),
    ('file_bytes', 'app.file_bytes'),
]

SUMMARY_COLUMNS = (['config_hash'] + [name for name, _ in SUMMARY_KEYS] +
                   ['n_runs', 'goodput_mean_bps', 'goodput_stderr',
                    'latency_mean_s', 'download_time_mean_s'])

TIMESERIES_COLUMNS = ['run_id', 't_s', 'goodput_bps', 'subflow_id']


@dataclass
class RunResult:
    config_hash: str
    seed: int
    goodput_mean_bps: float
    latency_mean_s: float
    download_time_s: float
    rlf: bool
    rlf_time_s: float
    delivered_bytes: int
    measured_s: float
    contributions: dict
    subflow_paths: tuple
    timeseries: pd.DataFrame = field(repr=False)
    counters: dict = field(default_factory=dict, repr=False)

    @property
    def run_id(self):
        return '{}-{}'.format(self.config_hash, self.seed)


@dataclass
class SummaryRow:
    config_hash: str
    n_runs: int
    goodput_mean_bps: float
    goodput_stderr: float
    latency_mean_s: float
    latency_stderr: float
    download_time_mean_s: float
    download_time_stderr: float
    columns: dict = field(default_factory=dict)


def _mean_stderr(values):
    s = pd.Series(values, dtype=float).dropna()
    if s.empty:
        return float('nan'), float('nan')
    if len(s) == 1:
        return float(s.iloc[0]), 0.0
    return float(s.mean()), float(s.sem(ddof=1))


def summarize(cfg, runs):
    """
    Mean and standard error (sample standard deviation over sqrt(n)) of
    every run metric; a single run has zero standard error

    Parameters
    ----------
    cfg: ScenarioConfig
    runs: list
        RunResult objects of ``cfg``, one per seed
    """
    if not runs:
        raise ValueError('No runs to summarize for {}'
                         .format(cfg.config_hash))
    goodput = _mean_stderr([r.goodput_mean_bps for r in runs])
    latency = _mean_stderr([r.latency_mean_s for r in runs])
    dl_time = _mean_stderr([r.download_time_s for r in runs])
    columns = {name: cfg.get(key) for name, key in SUMMARY_KEYS}
    return SummaryRow(cfg.config_hash, len(runs), goodput[0], goodput[1],
                      latency[0], latency[1], dl_time[0], dl_time[1],
                      columns)


def subflow_contribution(result, path=None):
    """
    Goodput carried by each subflow over the measured window, keyed by
    subflow id, or the value of the subflow on ``path``
    """
    if path is None:
        return dict(result.contributions)
    return result.contributions[result.subflow_paths.index(path)]


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, str):
        return value
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ''
    if isinstance(value, (int, np.integer)):
        value = int(value)
        if abs(value) < 10 ** 6:
            return str(value)
    return np.format_float_positional(float(value), precision=6,
                                      unique=False, fractional=False,
                                      trim='-')


def summary_frame(results):
    """
    DataFrame of formatted summary rows, one per config in input order
    """
    rows = []
    for cfg, runs in results:
        row = summarize(cfg, runs)
        record = {'config_hash': row.config_hash}
        record.update(row.columns)
        record.update({
            'n_runs': row.n_runs,
            'goodput_mean_bps': row.goodput_mean_bps,
            'goodput_stderr': row.goodput_stderr,
            'latency_mean_s': row.latency_mean_s,
            'download_time_mean_s': row.download_time_mean_s,
        })
        rows.append({k: _fmt(v) for k, v in record.items()})
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def timeseries_frame(results):
    frames = []
    for _, runs in results:
        for run in runs:
            ts = run.timeseries
            frames.append(pd.DataFrame({
                'run_id': run.run_id,
                't_s': [_fmt(v) for v in ts['t_s']],
                'goodput_bps': [_fmt(v) for v in ts['goodput_bps']],
                'subflow_id': [str(int(v)) for v in ts['subflow_id']],
            }, columns=TIMESERIES_COLUMNS))
    if not frames:
        return pd.DataFrame(columns=TIMESERIES_COLUMNS)
    return pd.concat(frames, ignore_index=True)


def emit_csv(results, path):
    """
    Write ``summary.csv`` and ``timeseries.csv`` into directory ``path``

    Parameters
    ----------
    results: list
        ``(cfg, [RunResult, ...])`` tuples, as returned by run_many
    path: str
        Output directory, created if missing

    Returns
    -------
        Tuple of the two file paths
    """
    os.makedirs(path, exist_ok=True)
    summary_path = os.path.join(path, 'summary.csv')
    ts_path = os.path.join(path, 'timeseries.csv')
    summary_frame(results).to_csv(summary_path, index=False)
    timeseries_frame(results).to_csv(ts_path, index=False)
    logger.info('Wrote {} and {}'.format(summary_path, ts_path))
    return summary_path, ts_path
