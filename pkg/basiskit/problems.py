from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from typing import List, Sequence

import numpy as np
import scipy.linalg
from scipy.special import expit

from basiskit.basis import SubspaceBasis
from basiskit.exceptions import BasisError, NumericalError
from basiskit.matrix import as_symmetric, solve_spd
from basiskit.models.problem import ClientShard, Reference
from basiskit.rng import Purpose, stream

logger = logging.getLogger(__name__)


def phi_second(t: np.ndarray) -> np.ndarray:
    """
    φʺ(t) = s/(1+s)² with s = e^{-bt}; equal to σ(t)σ(-t) for b = ±1.
    """
    return expit(t) * expit(-t)


class Problem(ABC):
    """
    f(x) = (1/n) Σ f_i(x), f_i(x) = φ_i(x) + (λ/2)‖x‖².

    data_* methods cover φ_i alone; the λ term is added by local_* and
    global_* and is never part of a transmitted Hessian.
    """

    def __init__(self, lam: float):
        if lam <= 0:
            raise ValueError(f'lambda must be positive, got {lam}')
        self.lam = lam

    @property
    @abstractmethod
    def n(self) -> int:
        raise NotImplementedError

    @property
    @abstractmethod
    def d(self) -> int:
        raise NotImplementedError

    @property
    def mu(self) -> float:
        return self.lam

    @abstractmethod
    def data_value(self, i: int, x: np.ndarray) -> float:
        raise NotImplementedError

    @abstractmethod
    def data_grad(self, i: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @abstractmethod
    def data_hess(self, i: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def local_value(self, i: int, x: np.ndarray) -> float:
        return self.data_value(i, x) + 0.5 * self.lam * float(x @ x)

    def local_grad(self, i: int, x: np.ndarray) -> np.ndarray:
        return self.data_grad(i, x) + self.lam * x

    def local_hess(self, i: int, x: np.ndarray) -> np.ndarray:
        return self.data_hess(i, x) + self.lam * np.eye(self.d)

    def global_value(self, x: np.ndarray) -> float:
        return float(np.mean([self.local_value(i, x) for i in range(self.n)]))

    def global_grad(self, x: np.ndarray) -> np.ndarray:
        return np.mean([self.local_grad(i, x) for i in range(self.n)], axis=0)

    def global_hess(self, x: np.ndarray) -> np.ndarray:
        return as_symmetric(np.mean([self.local_hess(i, x) for i in range(self.n)], axis=0))

    def zero(self) -> np.ndarray:
        return np.zeros(self.d)


class LogisticProblem(Problem):
    """
    φ_i(x) = (1/m) Σ_j log(1 + exp(-b_ij a_ijᵀx)).
    """

    def __init__(self, shards: Sequence[ClientShard], lam: float):
        super().__init__(lam)
        shards = list(shards)
        if not shards:
            raise ValueError('a problem needs at least one client')
        dims = {s.d for s in shards}
        if len(dims) != 1:
            raise ValueError(f'clients disagree on the dimension: {sorted(dims)}')
        self.shards: List[ClientShard] = shards

    @property
    def n(self) -> int:
        return len(self.shards)

    @property
    def d(self) -> int:
        return self.shards[0].d

    @property
    def m(self) -> int:
        return self.shards[0].m

    def margins(self, i: int, x: np.ndarray) -> np.ndarray:
        return self.shards[i].features @ x

    def data_value(self, i: int, x: np.ndarray) -> float:
        shard = self.shards[i]
        return float(np.mean(np.logaddexp(0.0, -shard.labels * self.margins(i, x))))

    def data_grad(self, i: int, x: np.ndarray) -> np.ndarray:
        shard = self.shards[i]
        bt = shard.labels * self.margins(i, x)
        weights = -shard.labels * expit(-bt)
        return shard.features.T @ weights / shard.m

    def data_hess(self, i: int, x: np.ndarray) -> np.ndarray:
        shard = self.shards[i]
        weights = phi_second(self.margins(i, x))
        a = shard.features
        return as_symmetric((a.T * weights) @ a / shard.m)

    def glm_hess_coeffs(self, i: int, x: np.ndarray, subspace: SubspaceBasis) -> np.ndarray:
        """
        γ_tl = (1/m) Σ_j φʺ(a_jᵀx) α_jt α_jl with α_j = Vᵀa_j.
        """
        shard = self.shards[i]
        alpha = shard.features @ subspace.vectors
        residual = shard.features - alpha @ subspace.vectors.T
        scale = 1e-8 * (1.0 + np.linalg.norm(shard.features))
        if np.linalg.norm(residual) > scale:
            raise BasisError(f'client {i} data lies outside the given subspace')
        weights = phi_second(self.margins(i, x))
        return as_symmetric((alpha.T * weights) @ alpha / shard.m)


class QuadraticProblem(Problem):
    """
    φ_i(x) = ½ xᵀP_i x − q_iᵀx with P_i symmetric PSD.
    """

    def __init__(self, p: Sequence[np.ndarray], q: Sequence[np.ndarray], lam: float):
        super().__init__(lam)
        self.p = [as_symmetric(np.atleast_2d(np.asarray(m, dtype=float))) for m in p]
        self.q = [np.asarray(v, dtype=float).ravel() for v in q]
        if len(self.p) != len(self.q) or not self.p:
            raise ValueError('need one (P, q) pair per client')

    @property
    def n(self) -> int:
        return len(self.p)

    @property
    def d(self) -> int:
        return self.p[0].shape[0]

    def data_value(self, i, x):
        return 0.5 * float(x @ self.p[i] @ x) - float(self.q[i] @ x)

    def data_grad(self, i, x):
        return self.p[i] @ x - self.q[i]

    def data_hess(self, i, x):
        return self.p[i].copy()


def newton_reference(problem: Problem, x0: np.ndarray = None, iters: int = 20, tol: float = 1e-12) -> Reference:
    x = problem.zero() if x0 is None else np.asarray(x0, dtype=float).copy()
    f0 = problem.global_value(x)
    done = 0
    grad = problem.global_grad(x)
    for done in range(1, iters + 1):
        if np.linalg.norm(grad) <= tol:
            done -= 1
            break
        x = x - solve_spd(problem.global_hess(x), grad)
        if not np.all(np.isfinite(x)):
            raise NumericalError(f'newton reference diverged at step {done}')
        grad = problem.global_grad(x)
    f_star = problem.global_value(x)
    logger.info(f'reference: f*={f_star:.12e} |grad|={np.linalg.norm(grad):.3e} after {done} newton steps (f0={f0:.6e})')
    return Reference(x_star=x, f_star=f_star, grad_norm=float(np.linalg.norm(grad)), newton_iters=done)


def newton_iterates(problem: Problem, x0: np.ndarray, steps: int) -> List[np.ndarray]:
    xs = [np.asarray(x0, dtype=float).copy()]
    for _ in range(steps):
        x = xs[-1]
        xs.append(x - solve_spd(problem.global_hess(x), problem.global_grad(x)))
    return xs


def synth_lowdim(d: int, r: int, n: int, m: int, seed: int, lam: float = 1e-3, noise: float = 0.1) -> LogisticProblem:
    """
    Each client draws its rows inside its own random r-dimensional subspace;
    labels come from one planted separator with a fraction `noise` flipped.
    """
    if not 1 <= r <= d:
        raise ValueError(f'need 1 <= r <= d, got r={r}, d={d}')
    rng = stream(seed, 0, 0, Purpose.DATA)
    separator = rng.standard_normal(d)
    shards = []
    for i in range(n):
        client_rng = stream(seed, 0, i + 1, Purpose.DATA)
        v, _ = np.linalg.qr(client_rng.standard_normal((d, r)))
        features = client_rng.standard_normal((m, r)) @ v.T
        labels = np.where(features @ separator >= 0, 1.0, -1.0)
        flip = client_rng.random(m) < noise
        labels[flip] = -labels[flip]
        shards.append(ClientShard(client_id=i, features=features, labels=labels))
    return LogisticProblem(shards, lam)


def smoothness_constant(problem: Problem, x: np.ndarray = None, iters: int = 100, seed: int = 0) -> float:
    """
    Largest eigenvalue of the data part of ∇²f(x) by power iteration.
    """
    x = problem.zero() if x is None else x
    hess = np.mean([problem.data_hess(i, x) for i in range(problem.n)], axis=0)
    v = stream(seed, 0, 0, Purpose.MONTE_CARLO).standard_normal(problem.d)
    v /= np.linalg.norm(v)
    value = 0.0
    for _ in range(iters):
        w = hess @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0
        value = float(v @ w)
        v = w / norm
    return value


def estimate_hessian_lipschitz(
    problem: Problem,
    samples: int = 50,
    seed: int = 0,
    radius: float = 1.0,
    norm: str = '2',
) -> float:
    """
    max ‖∇²f_i(x) − ∇²f_i(y)‖ / ‖x − y‖ over random pairs and clients.

    norm '2' is spectral (H), 'fro' Frobenius (H₁), 'max' the largest entry (ν).
    """
    if norm not in ('2', 'fro', 'max'):
        raise ValueError(f'norm must be "2", "fro" or "max", got {norm}')
    rng = stream(seed, 0, 0, Purpose.MONTE_CARLO)
    best = 0.0
    for _ in range(samples):
        x = radius * rng.standard_normal(problem.d)
        y = x + 0.1 * radius * rng.standard_normal(problem.d)
        for i in range(problem.n):
            diff = problem.data_hess(i, x) - problem.data_hess(i, y)
            if norm == '2':
                size = float(np.max(np.abs(scipy.linalg.eigvalsh(diff))))
            elif norm == 'fro':
                size = float(np.linalg.norm(diff))
            else:
                size = float(np.max(np.abs(diff)))
            best = max(best, size / float(np.linalg.norm(x - y)))
    return best
