from __future__ import annotations

import logging
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, confloat, conint

from basiskit.algorithms.base import MethodContext, check_finite
from basiskit.basis import MatrixBasis
from basiskit.exceptions import BasisError, ContractViolation
from basiskit.matrix import as_symmetric, min_eigenvalue, solve_spd
from basiskit.models.records import CostLedger, RoundCost

logger = logging.getLogger(__name__)


class Bl3Client(BaseModel):
    """
    A_i = Σ (L_jl + 2γ) B^{jl}, C_i = Σ 2γ B^{jl},
    g1 = A_i w, g2 = C_i w + ∇φ_i(w).

    coeffs holds h̃(∇²φ_i(z)) for the current z, previous_coeffs the one
    for the z before it.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    z: np.ndarray
    w: np.ndarray
    shift: np.ndarray
    gamma: confloat(gt=0)
    beta: float
    a: np.ndarray
    c: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    xi: conint(ge=0, le=1)
    coeffs: np.ndarray
    previous_coeffs: np.ndarray


class Bl3State(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    round: conint(ge=0)
    x: np.ndarray
    clients: List[Bl3Client]
    beta: float
    a: np.ndarray
    c: np.ndarray
    g1: np.ndarray
    g2: np.ndarray
    participants: List[int] = []

    @property
    def hessian(self) -> np.ndarray:
        return as_symmetric(self.beta * self.a - self.c)

    @property
    def g(self) -> np.ndarray:
        return self.beta * self.g1 - self.g2


def _gamma(shift: np.ndarray, c: float) -> float:
    return max(c, float(np.max(np.abs(shift))))


def _beta(target: np.ndarray, shift: np.ndarray, gamma: float, c: float) -> float:
    denominator = shift + 2.0 * gamma
    if np.min(denominator) < c * (1.0 - 1e-12):
        raise ContractViolation(f'BL3 denominator {np.min(denominator):.3e} fell below c={c}')
    return float(np.max((target + 2.0 * gamma) / denominator))


def _ones(basis: MatrixBasis) -> np.ndarray:
    return basis.reconstruct(np.ones((basis.d, basis.d)))


def check_bl3_basis(ctx: MethodContext):
    for i, basis in enumerate(ctx.bases):
        if not basis.symmetric or not basis.psd:
            raise BasisError(f'BL3 needs a PSD basis of symmetric matrices, client {i} has {basis!r}')


def bl3_init(ctx: MethodContext, x0: np.ndarray) -> Bl3State:
    check_bl3_basis(ctx)
    x0 = np.asarray(x0, dtype=float)
    c = ctx.config.c

    def client(i: int) -> Bl3Client:
        basis = ctx.bases[i]
        coeffs = basis.coeffs(ctx.problem.data_hess(i, x0))
        shift = ctx.initial_shift(i, x0)
        gamma = _gamma(shift, c)
        a = basis.reconstruct(shift + 2.0 * gamma)
        cm = 2.0 * gamma * _ones(basis)
        return Bl3Client(
            z=x0.copy(), w=x0.copy(), shift=shift, gamma=gamma,
            beta=_beta(coeffs, shift, gamma, c),
            a=a, c=cm, g1=a @ x0, g2=cm @ x0 + ctx.problem.data_grad(i, x0),
            xi=1, coeffs=coeffs, previous_coeffs=coeffs,
        )

    clients = ctx.map(client, range(ctx.n))
    return Bl3State(
        round=0,
        x=x0.copy(),
        clients=clients,
        beta=max(cl.beta for cl in clients),
        a=np.mean([cl.a for cl in clients], axis=0),
        c=np.mean([cl.c for cl in clients], axis=0),
        g1=np.mean([cl.g1 for cl in clients], axis=0),
        g2=np.mean([cl.g2 for cl in clients], axis=0),
    )


def bl3_step(state: Bl3State, ctx: MethodContext) -> Tuple[Bl3State, RoundCost]:
    k = state.round
    problem = ctx.problem
    option = ctx.config.option
    c = ctx.config.c
    ledger = CostLedger(ctx.n)

    x = solve_spd(state.hessian + ctx.lam * np.eye(ctx.d), state.g)
    check_finite(x, f'BL3 iterate at round {k}')
    chosen = ctx.participants(k)
    models = {}
    for i in chosen:
        v, cost = ctx.compress_model(x - state.clients[i].z, k, i)
        models[i] = v
        ledger.send_down(i, 'model', cost.total)

    def client(i: int):
        cl = state.clients[i]
        basis = ctx.bases[i]
        z = cl.z + ctx.eta * models[i]
        coeffs = basis.coeffs(problem.data_hess(i, z))
        s, cost = ctx.compress_shift(i, coeffs, cl.shift, k)
        shift = cl.shift + ctx.alpha * s
        gamma = _gamma(shift, c)
        reference = cl.coeffs if option == 1 else coeffs
        beta = _beta(reference, shift, gamma, c)
        ones = _ones(basis)
        delta_c = 2.0 * (gamma - cl.gamma) * ones
        delta_a = basis.reconstruct(shift - cl.shift) + delta_c
        a = cl.a + delta_a
        cm = cl.c + delta_c
        xi_next = ctx.bernoulli(k, i)
        w = z.copy() if cl.xi == 1 else cl.w
        updated = Bl3Client(
            z=z, w=w, shift=shift, gamma=gamma, beta=beta, a=a, c=cm,
            g1=a @ w, g2=cm @ w + problem.data_grad(i, w), xi=xi_next,
            coeffs=coeffs, previous_coeffs=cl.coeffs,
        )
        return updated, delta_a, delta_c, cost

    results = dict(zip(chosen, ctx.map(client, chosen)))

    a = state.a.copy()
    cm = state.c.copy()
    g1 = state.g1.copy()
    g2 = state.g2.copy()
    clients = list(state.clients)
    for i in chosen:
        old = state.clients[i]
        new, delta_a, delta_c, cost = results[i]
        ledger.send_up(i, 'hessian', cost.total)
        ledger.send_up(i, 'beta', ctx.float_bits)
        ledger.send_up(i, 'gamma', ctx.float_bits)
        ledger.send_up(i, 'xi', 1)
        if old.xi == 1:
            ledger.send_up(i, 'gradient', 2 * ctx.vector_bits)
            dg1 = new.g1 - old.g1
            dg2 = new.g2 - old.g2
        else:
            dg1 = delta_a @ new.w
            dg2 = delta_c @ new.w
        g1 = g1 + dg1 / ctx.n
        g2 = g2 + dg2 / ctx.n
        a = a + delta_a / ctx.n
        cm = cm + delta_c / ctx.n
        clients[i] = new

    nxt = Bl3State(
        round=k + 1,
        x=x,
        clients=clients,
        beta=max(cl.beta for cl in clients),
        a=a,
        c=cm,
        g1=g1,
        g2=g2,
        participants=chosen,
    )
    return nxt, ledger.close()


def bl3_residuals(state: Bl3State, ctx: MethodContext) -> dict:
    c = ctx.config.c
    shape = 0.0
    floor = np.inf
    relation = 0.0
    for i, cl in enumerate(state.clients):
        basis = ctx.bases[i]
        ones = _ones(basis)
        shape = max(
            shape,
            float(np.max(np.abs(cl.a - basis.reconstruct(cl.shift + 2.0 * cl.gamma)))),
            float(np.max(np.abs(cl.c - 2.0 * cl.gamma * ones))),
        )
        floor = min(floor, float(np.min(cl.shift + 2.0 * cl.gamma)) - c)
        relation = max(
            relation,
            float(np.max(np.abs(cl.g1 - cl.a @ cl.w))),
            float(np.max(np.abs(cl.g2 - cl.c @ cl.w - ctx.problem.data_grad(i, cl.w)))),
        )
    mean = lambda attr: np.mean([getattr(cl, attr) for cl in state.clients], axis=0)  # noqa: E731
    return {
        'auxiliary_shape': shape,
        'coefficient_floor': floor,
        'g_relation': relation,
        'server_a': float(np.max(np.abs(state.a - mean('a')))),
        'server_c': float(np.max(np.abs(state.c - mean('c')))),
        'server_g1': float(np.max(np.abs(state.g1 - mean('g1')))),
        'server_g2': float(np.max(np.abs(state.g2 - mean('g2')))),
    }


def bl3_dominance(state: Bl3State, ctx: MethodContext) -> List[float]:
    """
    λ_min(β A_i − C_i − ∇²φ_i(z_i)) per client; Option 1 compares against the
    Hessian at the previous z_i.
    """
    out = []
    for i, cl in enumerate(state.clients):
        basis = ctx.bases[i]
        reference = cl.previous_coeffs if ctx.config.option == 1 else cl.coeffs
        hess = basis.reconstruct(reference)
        out.append(min_eigenvalue(state.beta * cl.a - cl.c - hess))
    return out
