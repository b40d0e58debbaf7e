from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from basiskit.exceptions import BasisKitException
from basiskit.models.records import ExperimentStatus

logger = logging.getLogger(__name__)

FORMAT = '[%(asctime)s] %(levelname)s %(name)s :%(message)s'


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='basiskit', description='Basis Learn experiments')
    parser.add_argument('--debug', action='store_true', help='log at DEBUG level')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('run', help='run one experiment from a JSON config')
    p.add_argument('config')
    p.add_argument('--threads', type=int, default=None, help='worker pool size (default BASISKIT_THREADS)')

    p = sub.add_parser('verify', help='run verification suites')
    p.add_argument('suite', nargs='?', default='all')

    p = sub.add_parser('plot', help='chart f gap against bits per node')
    p.add_argument('csv', nargs='+')
    p.add_argument('-o', '--output', required=True)
    p.add_argument('--uploads-only', action='store_true', help='leave downloaded bits out of the x axis')

    p = sub.add_parser('cost', help='bits per round for a configured method')
    p.add_argument('config')
    p.add_argument('--theory', action='store_true', help='also estimate basis conditioning and smoothness constants')

    p = sub.add_parser('fetch', help='download a LibSVM dataset')
    p.add_argument('name')
    p.add_argument('--dest', default=None, help='target directory (default BASISKIT_DATA or ./data)')
    return parser


def _run(args) -> int:
    from basiskit.harness import load_config, run

    experiment = run(load_config(args.config), threads=args.threads)
    last = experiment.records[-1]
    print(f'{experiment.status.value} round={last.round} fgap={last.fgap:.6e} '
          f'up={last.up_bits:.6g} down={last.down_bits:.6g}')
    return 1 if experiment.status == ExperimentStatus.DIVERGED else 0


def _verify(args) -> int:
    from basiskit.verify import verify

    report = verify(args.suite)
    for check in report.checks:
        mark = 'PASS' if check.passed else 'FAIL'
        print(f'{mark} {check.name}: {check.measured:.3e} <= {check.bound:.3e}')
    failed = sum(not c.passed for c in report.checks)
    print(f'{len(report.checks) - failed}/{len(report.checks)} checks passed')
    return 0 if report.passed else 1


def _plot(args) -> int:
    from basiskit.harness import plot

    plot(args.csv, args.output, count_download=not args.uploads_only)
    return 0


def _cost(args) -> int:
    from basiskit.harness import cost_report, load_config

    print(cost_report(load_config(args.config), theory=args.theory).model_dump_json(indent=4))
    return 0


def _fetch(args) -> int:
    from basiskit.client import LibSVMClient
    from basiskit.libsvm import data_dir

    print(LibSVMClient(debug=args.debug).fetch(args.name, args.dest or data_dir()))
    return 0


COMMANDS = {
    'run': _run,
    'verify': _verify,
    'plot': _plot,
    'cost': _cost,
    'fetch': _fetch,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.debug else logging.INFO, format=FORMAT)
    try:
        return COMMANDS[args.command](args)
    except BasisKitException as e:
        logger.error(str(e))
        return 2


if __name__ == '__main__':
    sys.exit(main())
