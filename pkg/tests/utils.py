import bz2
import os
from unittest.mock import MagicMock

import numpy as np

from basiskit.libsvm import synth_libsvm
from basiskit.models.config import RunConfig, SynthSpec
from basiskit.models.problem import ClientShard
from basiskit.problems import LogisticProblem, QuadraticProblem

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'data')


def data_path(name: str) -> str:
    return os.path.join(DATA_DIR, name)


def mock_session_request(method, url, *arg, **kwargs):
    name = url.rsplit('/', 1)[-1]
    path = data_path(f'{method}_{name}.txt')
    mock_response = MagicMock()
    if not os.path.exists(path):
        mock_response.status_code = 404
        mock_response.content = b''
        return mock_response
    with open(path, 'rb') as f:
        content = f.read()
    if name.endswith('.bz2'):
        content = bz2.compress(content)
    mock_response.status_code = 200
    mock_response.content = content
    return mock_response


def write_a1a_like(directory: str, name: str = 'a1a', **kwargs) -> str:
    path = os.path.join(directory, name)
    with open(path, mode='w') as f:
        f.write(synth_libsvm(**kwargs))
    return path


def small_logistic(n: int = 3, m: int = 12, d: int = 5, lam: float = 1e-2, seed: int = 0) -> LogisticProblem:
    rng = np.random.default_rng(seed)
    shards = []
    for i in range(n):
        features = rng.standard_normal((m, d))
        labels = np.where(rng.random(m) < 0.5, -1.0, 1.0)
        shards.append(ClientShard(client_id=i, features=features, labels=labels))
    return LogisticProblem(shards, lam)


def scalar_quadratic(n: int = 2) -> QuadraticProblem:
    """
    f_i(x) = x²/2 on every client; λ is tiny so the minimiser stays at 0.
    """
    return QuadraticProblem([np.eye(1)] * n, [np.zeros(1)] * n, lam=1e-12)


def synth_config(d: int = 6, r: int = 2, m: int = 20, n: int = 3, **kwargs) -> RunConfig:
    return RunConfig(synth=SynthSpec(d=d, r=r, m=m), n=n, **kwargs)
