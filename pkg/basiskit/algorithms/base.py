from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from basiskit.basis import (
    MatrixBasis,
    data_subspace_basis,
    psd_subspace_basis,
    psd_sym_basis,
    standard_basis,
    subspace_matrix_basis,
    triangular_sym_basis,
)
from basiskit.compressors import Compressor, build_compressor, symmetric_safe
from basiskit.exceptions import ConfigError, NumericalError
from basiskit.models.config import BasisTag, RunConfig
from basiskit.models.records import BitCost
from basiskit.problems import LogisticProblem, Problem
from basiskit.rng import SERVER, Purpose, stream

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')


def worker_count(threads: Optional[int] = None) -> int:
    if threads is not None:
        return max(1, threads)
    value = os.environ.get('BASISKIT_THREADS', '1')
    try:
        return max(1, int(value))
    except ValueError:
        raise ConfigError(f'BASISKIT_THREADS must be an integer, got {value!r}')


def build_bases(problem: Problem, tag: BasisTag) -> List[MatrixBasis]:
    d = problem.d
    if tag == BasisTag.STANDARD:
        return [standard_basis(d)] * problem.n
    if tag == BasisTag.TRIANGULAR:
        return [triangular_sym_basis(d)] * problem.n
    if tag == BasisTag.PSD:
        return [psd_sym_basis(d)] * problem.n
    if not isinstance(problem, LogisticProblem):
        raise ConfigError(f'{tag.value} basis needs client data')
    bases = []
    for shard in problem.shards:
        subspace = data_subspace_basis(shard.features)
        if tag == BasisTag.SUBSPACE:
            bases.append(subspace_matrix_basis(subspace, d))
        else:
            bases.append(psd_subspace_basis(subspace, d))
    return bases


def check_finite(value: np.ndarray, what: str):
    if not np.all(np.isfinite(value)):
        raise NumericalError(f'non-finite {what}')


class MethodContext:
    """
    Everything a round needs besides the state: problem, per-client bases and
    compressors, step sizes and the worker pool.
    """

    def __init__(
        self,
        problem: Problem,
        config: RunConfig,
        bases: Sequence[MatrixBasis] = None,
        symmetric_grids: bool = False,
        threads: int = None,
    ):
        self.problem = problem
        self.config = config
        self.n = problem.n
        self.d = problem.d
        self.lam = problem.lam
        self.float_bits = config.float_bits
        self.seed = config.seed
        self.p = config.p
        self.tau = config.participants
        self.bases: List[MatrixBasis] = list(bases) if bases is not None else build_bases(problem, config.basis)
        if len(self.bases) != self.n:
            raise ConfigError(f'{len(self.bases)} bases for {self.n} clients')

        self.matrix_compressors: List[Compressor] = []
        for basis in self.bases:
            compressor = build_compressor(config.matrix_compressor, basis.active, self.float_bits)
            if symmetric_grids:
                compressor = symmetric_safe(compressor)
            self.matrix_compressors.append(compressor)
        self.model_compressor = build_compressor(config.model_compressor, self.d, self.float_bits)
        self.gradient_compressor = build_compressor(config.gradient_compressor, self.d, self.float_bits)

        if config.alpha is not None:
            self.alpha = config.alpha
        else:
            self.alpha = min(
                c.default_rate((b.active, b.active)) for c, b in zip(self.matrix_compressors, self.bases)
            )
        self.eta = config.eta if config.eta is not None else self.model_compressor.default_rate((self.d,))
        self.workers = worker_count(threads)
        self._executor = ThreadPoolExecutor(max_workers=self.workers) if self.workers > 1 else None

    def map(self, fn: Callable[[T], R], items: Sequence[T]) -> List[R]:
        """
        Applies fn per client; results come back in input order.
        """
        if self._executor is None:
            return [fn(item) for item in items]
        return list(self._executor.map(fn, items))

    def close(self):
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def rng(self, round: int, client: int, purpose: Purpose) -> np.random.Generator:
        return stream(self.seed, round, client, purpose)

    def server_rng(self, round: int, purpose: Purpose) -> np.random.Generator:
        return stream(self.seed, round, SERVER, purpose)

    def bernoulli(self, round: int, client: int = SERVER) -> int:
        return int(self.rng(round, client, Purpose.XI).random() < self.p)

    def participants(self, round: int) -> List[int]:
        if self.tau >= self.n:
            return list(range(self.n))
        chosen = self.server_rng(round, Purpose.PARTICIPATION).choice(self.n, size=self.tau, replace=False)
        return sorted(int(i) for i in chosen)

    def compress_shift(self, i: int, target: np.ndarray, shift: np.ndarray, round: int) -> Tuple[np.ndarray, BitCost]:
        """
        S_i = C_i(target − L_i) on the active block of client i's grid.
        """
        basis = self.bases[i]
        block, cost = self.matrix_compressors[i].compress(
            basis.block(target - shift),
            self.rng(round, i, Purpose.HESSIAN),
            address_space=basis.size,
            symmetric=basis.symmetric,
        )
        return basis.embed(block), cost

    def compress_model(self, delta: np.ndarray, round: int, client: int = SERVER) -> Tuple[np.ndarray, BitCost]:
        return self.model_compressor.compress(delta, self.rng(round, client, Purpose.MODEL))

    def initial_shift(self, i: int, x0: np.ndarray) -> np.ndarray:
        if self.config.init == 'zero':
            return np.zeros((self.d, self.d))
        return self.bases[i].coeffs(self.problem.data_hess(i, x0))

    @property
    def vector_bits(self) -> int:
        return self.d * self.float_bits

    def setup_bits(self) -> float:
        """
        One-time bits per node to share rotated bases: r·d floats each.
        """
        total = 0
        for basis in self.bases:
            if basis.rotation is not None:
                total += basis.active * self.d * self.float_bits
        return total / self.n
