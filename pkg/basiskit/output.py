from __future__ import annotations

import csv
import logging
from typing import Dict, List, Sequence, Tuple

import matplotlib

matplotlib.use('Agg')

from matplotlib.figure import Figure  # noqa: E402

from basiskit.exceptions import OutputError  # noqa: E402
from basiskit.models.records import RunRecord  # noqa: E402

logger = logging.getLogger(__name__)

CSV_HEADER = ['round', 'fgap', 'dist', 'up_bits', 'down_bits', 'wall_ms']

matplotlib.rcParams['svg.hashsalt'] = 'basiskit'
matplotlib.rcParams['svg.fonttype'] = 'none'


def write_csv(records: Sequence[RunRecord], path: str, wall_clock: bool = True):
    """
    wall_clock=False writes 0 in wall_ms so repeated runs compare byte for byte.
    """
    if not records:
        raise OutputError('no records to write')
    with open(path, mode='w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow([
                r.round,
                repr(r.fgap),
                repr(r.dist),
                repr(r.up_bits),
                repr(r.down_bits),
                repr(r.wall_ms if wall_clock else 0.0),
            ])


def read_csv(path: str) -> List[RunRecord]:
    with open(path, newline='') as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise OutputError(f'{path}: expected header {",".join(CSV_HEADER)}, got {header}')
        records = [
            RunRecord(**{k: (int(v) if k == 'round' else float(v)) for k, v in zip(CSV_HEADER, row)})
            for row in reader if row
        ]
    if not records:
        raise OutputError(f'{path}: no records')
    return records


def write_svg(series: Dict[str, Sequence[Tuple[float, float]]], path: str,
              xlabel: str = 'communicated bits per node', ylabel: str = 'f(x) - f*'):
    """
    Log-y line chart, one line per series. Each line carries the series name
    as its SVG id. Non-positive y values are skipped.
    """
    if not series:
        raise OutputError('no series to plot')
    fig = Figure(figsize=(6, 4))
    ax = fig.subplots()
    for name, points in series.items():
        if not points:
            raise OutputError(f'series {name} is empty')
        kept = [(x, y) for x, y in points if y > 0]
        xs = [x for x, _ in kept]
        ys = [y for _, y in kept]
        line, = ax.plot(xs, ys, label=name)
        line.set_gid(name)
    ax.set_yscale('log')
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format='svg', metadata={'Date': None})
    logger.info(f'wrote {len(series)} series to {path}')
