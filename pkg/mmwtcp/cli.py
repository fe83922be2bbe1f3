"""
Command line entry point: ``mmwtcp run``, ``mmwtcp preset`` and
``mmwtcp list-keys``
"""
import sys
from argparse import ArgumentParser

from .config import ConfigError, config_keys, format_value
from .parser import load_config
from .presets import PRESETS, preset
from .results import emit_csv
from .scenario import run_many
from .utils import _get_logger


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RLF = 3


def _build_parser():
    parser = ArgumentParser(prog='mmwtcp',
                            description='TCP and MP-TCP over mmWave and LTE '
                                        'links, simulated')
    parser.add_argument('--debug', action='store_true',
                        help='log run progress at INFO level')
    sub = parser.add_subparsers(dest='command')
    sub.required = True

    run = sub.add_parser('run', help='simulate one config file')
    run.add_argument('--config', required=True, help='scenario file')
    run.add_argument('--seed', type=int, default=None,
                     help='root seed, defaults to the first configured seed')
    run.add_argument('--out', default='.', help='output directory')

    pre = sub.add_parser('preset', help='simulate a named sweep')
    pre.add_argument('--name', required=True, choices=list(PRESETS))
    pre.add_argument('--runs', type=int, default=None,
                     help='seeds 1..N per config, defaults to the config '
                          'seeds')
    pre.add_argument('--out', default='.', help='output directory')
    pre.add_argument('--parallel', type=int, default=1,
                     help='worker processes')

    sub.add_parser('list-keys', help='print every config key')
    return parser


def _list_keys(out):
    for spec in config_keys():
        line = '{} = {}  # {}'.format(spec.key, format_value(spec.default),
                                      spec.help)
        if spec.choices:
            line += ' ({})'.format('|'.join(spec.choices))
        out.write(line + '\n')


def main(argv=None):
    args = _build_parser().parse_args(argv)
    logger = _get_logger(args.debug)

    if args.command == 'list-keys':
        _list_keys(sys.stdout)
        return EXIT_OK

    if args.command == 'run':
        try:
            cfg = load_config(args.config)
        except ConfigError as e:
            logger.error('Invalid config {}: {}'.format(args.config, e))
            return EXIT_CONFIG
        seed = cfg.seeds[0] if args.seed is None else args.seed
        results = run_many([cfg], [seed])
        emit_csv(results, args.out)
        run = results[0][1][0]
        if run.rlf:
            logger.warning('Radio link failure at {:.3f} s'
                           .format(run.rlf_time_s))
            return EXIT_RLF
        return EXIT_OK

    seeds = None if args.runs is None else list(range(1, args.runs + 1))
    configs = preset(args.name)
    logger.info('Preset {}: {} configs'.format(args.name, len(configs)))
    results = run_many(configs, seeds, args.parallel)
    emit_csv(results, args.out)
    return EXIT_OK


def run():
    sys.exit(main())


if __name__ == '__main__':
    run()
