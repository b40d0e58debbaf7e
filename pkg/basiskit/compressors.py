from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from enum import Enum
from typing import ClassVar, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from basiskit.exceptions import CompressorError
from basiskit.matrix import eig_sym, frobenius_norm, is_symmetric, svd, vec, unvec
from basiskit.models.config import CompressorKind, CompressorSpec
from basiskit.models.records import BitCost, CheckResult
from basiskit.rng import Purpose, stream

logger = logging.getLogger(__name__)


class CompressorClass(str, Enum):
    CONTRACTIVE = 'contractive'
    UNBIASED = 'unbiased'
    BOTH = 'both'


class Declared(BaseModel):
    """
    Class parameters a compressor claims for a given input shape.
    """
    model_config = ConfigDict(frozen=True)

    kind: CompressorClass
    delta: Optional[float] = None
    omega: Optional[float] = None

    @property
    def contractive(self) -> bool:
        return self.kind in (CompressorClass.CONTRACTIVE, CompressorClass.BOTH)

    @property
    def unbiased(self) -> bool:
        return self.kind in (CompressorClass.UNBIASED, CompressorClass.BOTH)


def index_bits(count: int, address_space: int) -> int:
    if address_space <= 1:
        return 0
    return count * math.ceil(math.log2(address_space))


class Compressor(ABC):
    name: ClassVar[str] = 'compressor'
    stochastic: ClassVar[bool] = False
    symmetric_only: ClassVar[bool] = False

    def __init__(self, float_bits: int = 64):
        self.float_bits = float_bits

    def compress(
        self,
        x: np.ndarray,
        rng: np.random.Generator = None,
        *,
        address_space: int = None,
        symmetric: bool = False,
    ) -> Tuple[np.ndarray, BitCost]:
        """
        Applies the compressor and prices the message.

        address_space overrides the count used for index bits, so a block cut out
        of a larger coefficient grid is addressed in the grid's coordinates.
        symmetric marks inputs that travel as a triangle.
        """
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise CompressorError(f'{self.name} received non-finite input')
        if self.stochastic and rng is None:
            raise CompressorError(f'{self.name} is stochastic and needs a random generator')
        return self._compress(x, rng, address_space, symmetric)

    @abstractmethod
    def _compress(self, x, rng, address_space, symmetric) -> Tuple[np.ndarray, BitCost]:
        raise NotImplementedError

    @abstractmethod
    def declared(self, shape: Tuple[int, ...]) -> Declared:
        raise NotImplementedError

    def contraction(self, shape: Tuple[int, ...]) -> Optional[float]:
        return self.declared(shape).delta

    def variance(self, shape: Tuple[int, ...]) -> Optional[float]:
        return self.declared(shape).omega

    def message_bits(self, shape: Tuple[int, ...], *, address_space: int = None, symmetric: bool = False) -> BitCost:
        """
        Cost of one message of the given shape. Message sizes never depend on
        the values, so any input of the shape prices every message.
        """
        ones = np.ones(shape)
        _, cost = self.compress(ones, stream(0), address_space=address_space, symmetric=symmetric)
        return cost

    def default_rate(self, shape: Tuple[int, ...]) -> float:
        """
        1 for contractive compressors, 1/(ω+1) for unbiased ones.
        """
        declared = self.declared(shape)
        if declared.contractive:
            return 1.0
        return 1.0 / (declared.omega + 1.0)

    def __repr__(self):
        return f'{type(self).__name__}()'


class Identity(Compressor):
    name = 'identity'

    def _compress(self, x, rng, address_space, symmetric):
        count = x.size
        if symmetric and x.ndim == 2:
            d = x.shape[0]
            count = d * (d + 1) // 2
        return x.copy(), BitCost(payload=count * self.float_bits)

    def declared(self, shape):
        return Declared(kind=CompressorClass.BOTH, delta=1.0, omega=0.0)


class _Sparsifier(Compressor):

    def __init__(self, k: int, float_bits: int = 64):
        super().__init__(float_bits)
        if k < 1:
            raise CompressorError(f'K must be at least 1, got {k}')
        self.k = k

    def _check(self, n: int):
        if self.k > n:
            raise CompressorError(f'K={self.k} exceeds the {n} available entries')

    def _cost(self, n: int, address_space: Optional[int]) -> BitCost:
        return BitCost(
            payload=self.k * self.float_bits,
            index=index_bits(self.k, address_space or n),
        )

    def __repr__(self):
        return f'{type(self).__name__}(k={self.k})'


def top_k_indices(values: np.ndarray, k: int) -> np.ndarray:
    """
    Positions of the k largest values, ties to the lowest position.
    """
    order = np.argsort(-values, kind='stable')
    return np.sort(order[:k])


class TopK(_Sparsifier):
    """
    Keeps the K largest-magnitude entries. Flat positions follow vec order.
    """
    name = 'top_k'

    def _compress(self, x, rng, address_space, symmetric):
        flat = vec(x) if x.ndim == 2 else x.ravel()
        self._check(flat.size)
        keep = top_k_indices(np.abs(flat), self.k)
        out = np.zeros_like(flat)
        out[keep] = flat[keep]
        out = unvec(out, *x.shape) if x.ndim == 2 else out.reshape(x.shape)
        return out, self._cost(flat.size, address_space)

    def declared(self, shape):
        return Declared(kind=CompressorClass.CONTRACTIVE, delta=self.k / int(np.prod(shape)))


class TopKSym(_Sparsifier):
    """
    Top-K over the triangle of a symmetric matrix, mirrored back.

    Entries are ranked by their share of the Frobenius norm, so an off-diagonal
    entry counts twice.
    """
    name = 'top_k_sym'
    symmetric_only = True

    def _compress(self, x, rng, address_space, symmetric):
        if not is_symmetric(x):
            raise CompressorError('top_k_sym expects a symmetric matrix')
        d = x.shape[0]
        cols, rows = np.triu_indices(d)
        values = x[rows, cols]
        weight = np.where(rows == cols, 1.0, 2.0)
        self._check(values.size)
        keep = top_k_indices(weight * values * values, self.k)
        out = np.zeros_like(x)
        out[rows[keep], cols[keep]] = values[keep]
        out[cols[keep], rows[keep]] = values[keep]
        return out, self._cost(values.size, address_space)

    def declared(self, shape):
        d = shape[0]
        return Declared(kind=CompressorClass.CONTRACTIVE, delta=self.k / (d * (d + 1) // 2))


class RandK(_Sparsifier):
    name = 'rand_k'
    stochastic = True

    def _compress(self, x, rng, address_space, symmetric):
        flat = x.ravel()
        n = flat.size
        self._check(n)
        keep = rng.choice(n, size=self.k, replace=False)
        out = np.zeros_like(flat)
        out[keep] = flat[keep] * (n / self.k)
        return out.reshape(x.shape), self._cost(n, address_space)

    def declared(self, shape):
        n = int(np.prod(shape))
        return Declared(kind=CompressorClass.UNBIASED, omega=n / self.k - 1.0)


class RankR(Compressor):
    """
    Best rank-R approximation. Symmetric inputs are truncated by eigenvalue
    magnitude so the output stays symmetric.
    """
    name = 'rank_r'

    def __init__(self, rank: int, float_bits: int = 64):
        super().__init__(float_bits)
        if rank < 1:
            raise CompressorError(f'R must be at least 1, got {rank}')
        self.rank = rank

    def _compress(self, x, rng, address_space, symmetric):
        if x.ndim != 2 or x.shape[0] != x.shape[1]:
            raise CompressorError(f'rank_r expects a square matrix, got {x.shape}')
        d = x.shape[0]
        if self.rank > d:
            raise CompressorError(f'R={self.rank} exceeds d={d}')
        if is_symmetric(x):
            decomp = eig_sym(x)
            keep = np.argsort(-np.abs(decomp.eigenvalues), kind='stable')[:self.rank]
            lam = np.zeros_like(decomp.eigenvalues)
            lam[keep] = decomp.eigenvalues[keep]
            out = decomp.compose(lam)
        else:
            u, s, v = svd(x)
            out = (u[:, :self.rank] * s[:self.rank]) @ v[:, :self.rank].T
        return out, BitCost(payload=self.rank * (2 * d + 1) * self.float_bits)

    def declared(self, shape):
        return Declared(kind=CompressorClass.CONTRACTIVE, delta=self.rank / shape[0])

    def __repr__(self):
        return f'RankR(rank={self.rank})'


class RandomDithering(Compressor):
    """
    sign(x)·‖x‖_q·ξ_s/s with stochastic rounding to s levels.

    levels=None picks s = round(√d) for the input size d.
    """
    name = 'dithering'
    stochastic = True

    def __init__(self, levels: int = None, norm: str = '2', float_bits: int = 64):
        super().__init__(float_bits)
        if levels is not None and levels < 1:
            raise CompressorError(f'levels must be at least 1, got {levels}')
        if norm not in ('2', 'inf'):
            raise CompressorError(f'norm must be "2" or "inf", got {norm}')
        self.levels = levels
        self.norm = norm

    def levels_for(self, d: int) -> int:
        if self.levels is not None:
            return self.levels
        return max(1, int(round(math.sqrt(d))))

    def _compress(self, x, rng, address_space, symmetric):
        flat = x.ravel()
        d = flat.size
        s = self.levels_for(d)
        cost = BitCost(payload=d * (1 + math.ceil(math.log2(s + 1))), scalar=self.float_bits)
        scale = np.max(np.abs(flat)) if self.norm == 'inf' else np.linalg.norm(flat)
        if scale == 0:
            return np.zeros_like(x), cost
        level = s * np.abs(flat) / scale
        lower = np.floor(level)
        xi = lower + (rng.random(d) < (level - lower))
        out = np.sign(flat) * scale * xi / s
        return out.reshape(x.shape), cost

    def declared(self, shape):
        d = int(np.prod(shape))
        s = self.levels_for(d)
        if self.norm == '2':
            omega = min(d / s ** 2, math.sqrt(d) / s)
        else:
            omega = min(d / (4 * s ** 2), math.sqrt(d) / s)
        return Declared(kind=CompressorClass.UNBIASED, omega=omega)

    def __repr__(self):
        return f'RandomDithering(levels={self.levels}, norm={self.norm})'


class Natural(Compressor):
    """
    Rounds each entry to one of its two neighbouring signed powers of two,
    unbiased. 1 sign bit and 8 exponent bits per entry.
    """
    name = 'natural'
    stochastic = True

    def _compress(self, x, rng, address_space, symmetric):
        mag = np.abs(x)
        mantissa, exponent = np.frexp(mag)
        lower = np.ldexp(0.5, exponent)
        up = rng.random(x.shape) < (2.0 * mantissa - 1.0)
        out = np.where(up, 2.0 * lower, lower)
        out = np.where(mag == 0, 0.0, np.sign(x) * out)
        return out, BitCost(payload=9 * x.size)

    def declared(self, shape):
        return Declared(kind=CompressorClass.UNBIASED, omega=1.0 / 8.0)


class ComposedRankUnbiased(Compressor):
    """
    Rank-R skeleton whose singular vectors travel through unbiased compressors:

        Σ_{i≤R} σ_i Q1(a_i u_i) Q2(b_i v_i)ᵀ / (a_i b_i (ω1+1)(ω2+1))

    scaling "unit" sets a_i = b_i = 1 and sends σ_i, "sqrt_sigma" sets
    a_i = b_i = √σ_i and folds σ_i into the vectors.
    """
    name = 'composed_rank'
    stochastic = True

    def __init__(self, rank: int, inner1: Compressor, inner2: Compressor, scaling: str = 'unit', float_bits: int = 64):
        super().__init__(float_bits)
        if rank < 1:
            raise CompressorError(f'R must be at least 1, got {rank}')
        if scaling not in ('unit', 'sqrt_sigma'):
            raise CompressorError(f'unknown scaling {scaling}')
        for inner in (inner1, inner2):
            if not inner.declared((1,)).unbiased:
                raise CompressorError(f'{inner.name} is not unbiased')
        self.rank = rank
        self.inner1 = inner1
        self.inner2 = inner2
        self.scaling = scaling

    def _compress(self, x, rng, address_space, symmetric):
        if x.ndim != 2 or x.shape[0] != x.shape[1]:
            raise CompressorError(f'composed rank compressor expects a square matrix, got {x.shape}')
        d = x.shape[0]
        if self.rank > d:
            raise CompressorError(f'R={self.rank} exceeds d={d}')
        w1 = self.inner1.variance((d,))
        w2 = self.inner2.variance((d,))
        u, s, v = svd(x)
        out = np.zeros_like(x)
        cost = BitCost()
        for i in range(self.rank):
            a = math.sqrt(s[i]) if self.scaling == 'sqrt_sigma' else 1.0
            qu, c1 = self.inner1.compress(a * u[:, i], rng)
            qv, c2 = self.inner2.compress(a * v[:, i], rng)
            cost = cost + c1 + c2
            if self.scaling == 'unit':
                cost = cost + BitCost(scalar=self.float_bits)
            if s[i] == 0:
                continue
            out += (s[i] / (a * a * (w1 + 1) * (w2 + 1))) * np.outer(qu, qv)
        return out, cost

    def declared(self, shape):
        d = shape[0]
        w1 = self.inner1.variance((d,))
        w2 = self.inner2.variance((d,))
        return Declared(kind=CompressorClass.CONTRACTIVE, delta=self.rank / (d * (w1 + 1) * (w2 + 1)))

    def __repr__(self):
        return f'ComposedRankUnbiased(rank={self.rank}, inner1={self.inner1!r}, inner2={self.inner2!r}, scaling={self.scaling})'


class ComposedTopUnbiased(Compressor):
    """
    Q(TopK(x)) / (ω+1): the K surviving values travel through Q.
    """
    name = 'composed_top'
    stochastic = True

    def __init__(self, k: int, inner: Compressor, float_bits: int = 64):
        super().__init__(float_bits)
        if not inner.declared((1,)).unbiased:
            raise CompressorError(f'{inner.name} is not unbiased')
        self.top = TopK(k, float_bits)
        self.inner = inner

    def _compress(self, x, rng, address_space, symmetric):
        flat = vec(x) if x.ndim == 2 else x.ravel()
        self.top._check(flat.size)
        keep = top_k_indices(np.abs(flat), self.top.k)
        omega = self.inner.variance((self.top.k,))
        values, inner_cost = self.inner.compress(flat[keep], rng)
        out = np.zeros_like(flat)
        out[keep] = values / (omega + 1.0)
        out = unvec(out, *x.shape) if x.ndim == 2 else out.reshape(x.shape)
        cost = inner_cost + BitCost(index=index_bits(self.top.k, address_space or flat.size))
        return out, cost

    def declared(self, shape):
        n = int(np.prod(shape))
        omega = self.inner.variance((self.top.k,))
        return Declared(kind=CompressorClass.CONTRACTIVE, delta=(self.top.k / n) / (omega + 1.0))

    def __repr__(self):
        return f'ComposedTopUnbiased(k={self.top.k}, inner={self.inner!r})'


class Symmetrized(Compressor):
    """
    (C(A) + C(A)ᵀ)/2 on symmetric inputs; other inputs pass through C.
    """
    name = 'symmetrized'

    def __init__(self, inner: Compressor):
        super().__init__(inner.float_bits)
        self.inner = inner

    @property
    def stochastic(self):
        return self.inner.stochastic

    def _compress(self, x, rng, address_space, symmetric):
        if not is_symmetric(x):
            return self.inner.compress(x, rng, address_space=address_space, symmetric=symmetric)
        out, cost = self.inner.compress(x, rng, address_space=address_space, symmetric=True)
        return 0.5 * (out + out.T), cost

    def declared(self, shape):
        return self.inner.declared(shape)

    def __repr__(self):
        return f'Symmetrized({self.inner!r})'


def symmetric_safe(compressor: Compressor) -> Compressor:
    if isinstance(compressor, (Symmetrized, Identity, TopKSym)):
        return compressor
    return Symmetrized(compressor)


def build_compressor(spec: CompressorSpec, block: int, float_bits: int = 64) -> Compressor:
    """
    block is the side of the square block (or the vector length) the
    compressor will see; it resolves k = "r" and natural sizes.
    """
    k = block if spec.k == 'r' else spec.k
    kind = spec.kind
    if kind == CompressorKind.IDENTITY:
        compressor = Identity(float_bits)
    elif kind == CompressorKind.TOP_K:
        compressor = TopK(k, float_bits)
    elif kind == CompressorKind.TOP_K_SYM:
        compressor = TopKSym(k, float_bits)
    elif kind == CompressorKind.RAND_K:
        compressor = RandK(k, float_bits)
    elif kind == CompressorKind.RANK_R:
        compressor = RankR(spec.rank, float_bits)
    elif kind == CompressorKind.DITHERING:
        compressor = RandomDithering(spec.levels, spec.norm, float_bits)
    elif kind == CompressorKind.NATURAL:
        compressor = Natural(float_bits)
    elif kind == CompressorKind.RRANK_R:
        inner = RandomDithering(spec.levels, spec.norm, float_bits)
        compressor = ComposedRankUnbiased(spec.rank, inner, inner, spec.scaling, float_bits)
    elif kind == CompressorKind.NRANK_R:
        inner = Natural(float_bits)
        compressor = ComposedRankUnbiased(spec.rank, inner, inner, spec.scaling, float_bits)
    elif kind == CompressorKind.RTOP_K:
        compressor = ComposedTopUnbiased(k, RandomDithering(spec.levels, spec.norm, float_bits), float_bits)
    elif kind == CompressorKind.NTOP_K:
        compressor = ComposedTopUnbiased(k, Natural(float_bits), float_bits)
    else:
        raise CompressorError(f'unknown compressor kind {kind}')
    if spec.symmetrize:
        compressor = Symmetrized(compressor)
    return compressor


MIN_TRIALS = 1000


class CertifyReport(BaseModel):
    compressor: str
    declared: List[Declared]
    trials: int
    checks: List[CheckResult]
    max_violation: float
    passed: bool


def certify(
    compressor: Compressor,
    declared: Declared = None,
    trials: int = 1000,
    shapes: Sequence[Tuple[int, ...]] = ((4, 4),),
    seed: int = 0,
) -> CertifyReport:
    """
    Monte-Carlo check of a declared class over random inputs.

    Contraction: max per-input ratio ‖A−C(A)‖²/‖A‖² for deterministic
    compressors, its mean for stochastic ones, against (1−δ)(1 + 4/√trials).
    Unbiasedness: every coordinate of the sample mean within 4 standard errors
    of the input, and mean ‖C(A)‖²/‖A‖² against (ω+1)(1 + 4/√trials).
    The first input of every shape is the all-ones matrix.
    """
    if trials < MIN_TRIALS:
        raise CompressorError(f'certify needs at least {MIN_TRIALS} trials, got {trials}')
    slack = 1.0 + 4.0 / math.sqrt(trials)
    checks = []
    claims = []
    for j, shape in enumerate(shapes):
        claim = declared or compressor.declared(shape)
        claims.append(claim)
        rng = stream(seed, 0, j, Purpose.MONTE_CARLO)
        inputs = [np.ones(shape)]
        for _ in range(trials - 1):
            a = rng.standard_normal(shape)
            if compressor.symmetric_only:
                a = 0.5 * (a + a.T)
            inputs.append(a)
        label = f'{compressor.name}{list(shape)}'

        if claim.contractive:
            ratios = []
            for a in inputs:
                out, _ = compressor.compress(a, rng)
                ratios.append(frobenius_norm(a - out) ** 2 / frobenius_norm(a) ** 2)
            measured = float(np.mean(ratios)) if compressor.stochastic else float(np.max(ratios))
            bound = (1.0 - claim.delta) * slack
            checks.append(CheckResult(
                name=f'{label} contraction delta={claim.delta:.6g}',
                passed=measured <= bound + 1e-12,
                measured=measured,
                bound=bound,
            ))

        if claim.unbiased:
            a = inputs[-1]
            samples = np.stack([compressor.compress(a, rng)[0] for _ in range(trials)])
            mean = samples.mean(axis=0)
            se = samples.std(axis=0, ddof=1) / math.sqrt(trials)
            z = np.abs(mean - a) / np.maximum(se, 1e-300)
            z = np.where(np.abs(mean - a) <= 1e-12 * (1 + np.abs(a)), 0.0, z)
            measured = float(np.max(z))
            checks.append(CheckResult(
                name=f'{label} mean recovery',
                passed=measured <= 4.0,
                measured=measured,
                bound=4.0,
            ))
            moments = []
            for b in inputs:
                out, _ = compressor.compress(b, rng)
                moments.append(frobenius_norm(out) ** 2 / frobenius_norm(b) ** 2)
            measured = float(np.mean(moments))
            bound = (claim.omega + 1.0) * slack
            checks.append(CheckResult(
                name=f'{label} second moment omega={claim.omega:.6g}',
                passed=measured <= bound + 1e-12,
                measured=measured,
                bound=bound,
            ))

    violation = max([max(0.0, c.measured - c.bound) for c in checks] + [0.0])
    report = CertifyReport(
        compressor=repr(compressor),
        declared=claims,
        trials=trials,
        checks=checks,
        max_violation=violation,
        passed=all(c.passed for c in checks),
    )
    if not report.passed:
        logger.warning(f'certify failed for {report.compressor}: max violation {violation:.3e}')
    return report
