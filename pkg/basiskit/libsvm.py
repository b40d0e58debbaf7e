from __future__ import annotations

import logging
import os
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Union

import numpy as np
from pydantic import ValidationError

from basiskit.exceptions import ConfigError, DataFormatError
from basiskit.models.config import RunConfig
from basiskit.models.dataset import DatasetInfo, RawDataset, RawRow
from basiskit.models.problem import ClientShard
from basiskit.problems import LogisticProblem, synth_lowdim
from basiskit.rng import Purpose, stream

logger = logging.getLogger(__name__)

DATASETS: Dict[str, DatasetInfo] = {
    info.name: info for info in [
        DatasetInfo(name='a1a', filename='a1a', workers=16, points=1600, dim=123, rank=64),
        DatasetInfo(name='a9a', filename='a9a', workers=80, points=32560, dim=123, rank=82),
        DatasetInfo(name='phishing', filename='phishing', workers=100, points=110, dim=68, rank=35),
        DatasetInfo(name='covtype', filename='covtype.libsvm.binary.bz2', workers=200, points=581000, dim=54, rank=24),
        DatasetInfo(name='madelon', filename='madelon', workers=10, points=2000, dim=500, rank=200),
        DatasetInfo(name='w2a', filename='w2a', workers=50, points=3450, dim=300, rank=59),
        DatasetInfo(name='w8a', filename='w8a', workers=142, points=49700, dim=300, rank=133),
    ]
}


def _parse_line(line: str, number: int) -> Optional[RawRow]:
    text = line.split('#', 1)[0].strip()
    if not text:
        return None
    tokens = text.split()
    try:
        label = float(tokens[0])
    except ValueError:
        raise DataFormatError(f'non-numeric label {tokens[0]!r}', number)
    features = []
    for token in tokens[1:]:
        index, sep, value = token.partition(':')
        if not sep:
            raise DataFormatError(f'expected index:value, got {token!r}', number)
        try:
            features.append((int(index), float(value)))
        except ValueError:
            raise DataFormatError(f'non-numeric token {token!r}', number)
        if features[-1][0] < 1:
            raise DataFormatError(f'feature index must be at least 1, got {index}', number)
        if len(features) > 1 and features[-1][0] <= features[-2][0]:
            raise DataFormatError(f'feature index {index} does not increase', number)
    if not np.isfinite(label) or not all(np.isfinite(v) for _, v in features):
        raise DataFormatError('non-finite value', number)
    try:
        return RawRow(label=label, features=features)
    except ValidationError as e:
        raise DataFormatError(f'invalid row [{e}]', number)


def label_signs(labels: Sequence[float]) -> List[float]:
    """
    Positive labels are +1 and the rest -1, except that a {1, 2} label set
    (covtype) maps 1 to +1 and 2 to -1.
    """
    if set(labels) == {1.0, 2.0}:
        return [1.0 if v == 1.0 else -1.0 for v in labels]
    return [1.0 if v > 0 else -1.0 for v in labels]


def parse_libsvm(stream: Union[TextIO, Iterable[str], str]) -> RawDataset:
    """
    Parses "label idx:val idx:val ..." lines; '#' starts a comment.
    Labels map to ±1 over the whole file, see label_signs.
    """
    lines = stream.splitlines() if isinstance(stream, str) else stream
    rows: List[RawRow] = []
    max_index = 0
    for number, line in enumerate(lines, start=1):
        row = _parse_line(line, number)
        if row is None:
            continue
        rows.append(row)
        if row.features:
            max_index = max(max_index, row.features[-1][0])
    if not rows:
        raise DataFormatError('empty dataset')
    signs = label_signs([row.label for row in rows])
    rows = [row.model_copy(update={'label': s}) for row, s in zip(rows, signs)]
    return RawDataset(rows=rows, max_index=max_index)


def _decoded(lines: Iterable[bytes]) -> Iterable[str]:
    for number, line in enumerate(lines, start=1):
        try:
            yield line.decode('utf-8')
        except UnicodeDecodeError as e:
            raise DataFormatError(f'invalid UTF-8 [{e}]', number)


def read_libsvm(path: str) -> RawDataset:
    with open(path, mode='rb') as f:
        try:
            return parse_libsvm(_decoded(f))
        except DataFormatError as e:
            error = DataFormatError(f'failed to parse {path} [{e}]')
            error.line = e.line
            raise error


def serialize_libsvm(raw: RawDataset) -> str:
    out = []
    for row in raw.rows:
        label = '+1' if row.label > 0 else '-1'
        out.append(' '.join([label] + [f'{i}:{v!r}' for i, v in row.features]))
    return '\n'.join(out) + '\n'


def densify(raw: RawDataset, d: int = None) -> np.ndarray:
    """
    Dense rows×d matrix; features beyond d are dropped, missing ones are zero.
    """
    d = raw.max_index if d is None else d
    x = np.zeros((len(raw.rows), d))
    for r, row in enumerate(raw.rows):
        for index, value in row.features:
            if index <= d:
                x[r, index - 1] = value
    return x


def partition(raw: RawDataset, n: int, d: int = None, rows: int = None) -> List[ClientShard]:
    """
    Contiguous equal shards of m = ⌊rows/n⌋; excess rows are dropped from the tail.
    """
    available = len(raw.rows) if rows is None else min(rows, len(raw.rows))
    if n > available:
        raise ConfigError(f'cannot split {available} rows across {n} clients')
    m = available // n
    features = densify(raw, d)
    labels = np.array([row.label for row in raw.rows])
    shards = []
    for i in range(n):
        part = slice(i * m, (i + 1) * m)
        shards.append(ClientShard(client_id=i, features=features[part], labels=labels[part]))
    logger.debug(f'partitioned {available} rows into {n} clients of {m} (dropped {available - n * m})')
    return shards


def data_dir() -> str:
    return os.environ.get('BASISKIT_DATA', 'data')


def load_problem(config: RunConfig) -> LogisticProblem:
    if config.synth is not None:
        spec = config.synth
        return synth_lowdim(spec.d, spec.r, config.n, spec.m, config.seed, lam=config.lam)

    info = None
    if config.dataset_name is not None:
        info = DATASETS.get(config.dataset_name)
        if info is None:
            raise ConfigError(f'unknown dataset {config.dataset_name}; known: {", ".join(DATASETS)}')
    path = config.dataset
    if path is None:
        path = os.path.join(data_dir(), info.filename.replace('.bz2', ''))
    if not os.path.exists(path):
        raise ConfigError(f'dataset file {path} not found')

    raw = read_libsvm(path)
    d = config.d or (info.dim if info else None)
    shards = partition(raw, config.n, d, config.rows)
    logger.info(f'loaded {path}: {len(raw.rows)} rows, d={shards[0].d}, n={config.n}, m={shards[0].m}')
    return LogisticProblem(shards, config.lam)


def synth_libsvm(rows: int = 400, d: int = 123, active: int = 14, noise: float = 2.0, seed: int = 0) -> str:
    """
    LibSVM text shaped like a1a: binary features with `active` of them on per
    row, labels from a planted linear score plus Gaussian noise. The default
    noise misclassifies about 15% of the rows under the planted score.
    """
    if not 1 <= active <= d:
        raise ConfigError(f'need 1 <= active <= d, got active={active}, d={d}')
    rng = stream(seed, 0, 0, Purpose.DATA)
    weights = rng.standard_normal(d)
    lines = []
    for _ in range(rows):
        on = np.sort(rng.choice(d, size=active, replace=False)) + 1
        score = weights[on - 1].sum() + noise * rng.standard_normal()
        label = '+1' if score > 0 else '-1'
        lines.append(' '.join([label] + [f'{i}:1' for i in on]))
    return '\n'.join(lines) + '\n'


def a1a_subset(rows: int = 400, n: int = 4, lam: float = 1e-3, seed: int = 0) -> LogisticProblem:
    """
    The scaled-down a1a problem the verification suites run on, generated
    locally so no download is needed.
    """
    info = DATASETS['a1a']
    raw = parse_libsvm(synth_libsvm(rows=rows, d=info.dim, seed=seed))
    return LogisticProblem(partition(raw, n, info.dim), lam)
