from __future__ import annotations

import logging
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, conint

from basiskit.algorithms.base import MethodContext, check_finite
from basiskit.matrix import as_symmetric, min_eigenvalue, project_psd_mu, solve_spd
from basiskit.models.records import CostLedger, RoundCost

logger = logging.getLogger(__name__)


class Bl1State(BaseModel):
    """
    Shared model z, w and server/client Hessian estimates. Hessians hold the
    data part only; λI is added locally.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    round: conint(ge=0)
    x: np.ndarray
    z: np.ndarray
    w: np.ndarray
    shifts: List[np.ndarray]
    client_hessians: List[np.ndarray]
    hessian: np.ndarray
    xi: conint(ge=0, le=1)
    grad_w: np.ndarray
    projection_active: bool = False


def bl1_init(ctx: MethodContext, x0: np.ndarray) -> Bl1State:
    x0 = np.asarray(x0, dtype=float)
    shifts = ctx.map(lambda i: ctx.initial_shift(i, x0), range(ctx.n))
    hessians = [ctx.bases[i].reconstruct(shifts[i]) for i in range(ctx.n)]
    return Bl1State(
        round=0,
        x=x0.copy(),
        z=x0.copy(),
        w=x0.copy(),
        shifts=shifts,
        client_hessians=hessians,
        hessian=as_symmetric(np.mean(hessians, axis=0)),
        xi=1,
        grad_w=ctx.problem.global_grad(x0),
    )


def bl1_step(state: Bl1State, ctx: MethodContext) -> Tuple[Bl1State, RoundCost]:
    k = state.round
    problem = ctx.problem
    ledger = CostLedger(ctx.n)

    def gradient_bits(i: int) -> int:
        if ctx.config.gradient_in_basis:
            return ctx.bases[i].active * ctx.float_bits
        return ctx.vector_bits

    def client(i: int):
        target = ctx.bases[i].coeffs(problem.data_hess(i, state.z))
        s, cost = ctx.compress_shift(i, target, state.shifts[i], k)
        grad = problem.local_grad(i, state.z) if state.xi == 1 else None
        shift = state.shifts[i] + ctx.alpha * s
        delta = ctx.alpha * ctx.bases[i].reconstruct(s)
        return shift, state.client_hessians[i] + delta, delta, grad, cost

    results = ctx.map(client, range(ctx.n))
    for i, (_, _, _, _, cost) in enumerate(results):
        ledger.send_up(i, 'hessian', cost.total)
        if state.xi == 1:
            ledger.send_up(i, 'gradient', gradient_bits(i))

    # server
    hessian_next = state.hessian.copy()
    for _, _, delta, _, _ in results:
        hessian_next = hessian_next + delta / ctx.n
    hessian_next = as_symmetric(hessian_next)
    learned = hessian_next if ctx.config.hessian_order == 'fresh' else state.hessian
    regularized = learned + ctx.lam * np.eye(ctx.d)
    projection_active = min_eigenvalue(regularized) < ctx.lam * (1 - 1e-9)
    projected = project_psd_mu(regularized, ctx.lam)

    if state.xi == 1:
        w = state.z.copy()
        grad_w = np.mean([r[3] for r in results], axis=0)
        g = grad_w
    else:
        w = state.w
        grad_w = state.grad_w
        g = projected @ (state.z - state.w) + grad_w

    x = state.z - solve_spd(projected, g)
    check_finite(x, f'BL1 iterate at round {k}')
    v, model_cost = ctx.compress_model(x - state.z, k)
    z = state.z + ctx.eta * v
    xi = ctx.bernoulli(k)
    for i in range(ctx.n):
        ledger.send_down(i, 'model', model_cost.total)
        ledger.send_down(i, 'xi', 1)

    nxt = Bl1State(
        round=k + 1,
        x=x,
        z=z,
        w=w,
        shifts=[r[0] for r in results],
        client_hessians=[r[1] for r in results],
        hessian=hessian_next,
        xi=xi,
        grad_w=grad_w,
        projection_active=projection_active,
    )
    return nxt, ledger.close()


def bl1_residuals(state: Bl1State, ctx: MethodContext) -> dict:
    """
    Server/client consistency of a BL1 state.
    """
    mean = np.mean(state.client_hessians, axis=0)
    recon = max(
        float(np.max(np.abs(ctx.bases[i].reconstruct(state.shifts[i]) - state.client_hessians[i])))
        for i in range(ctx.n)
    )
    return {
        'server_mean': float(np.max(np.abs(state.hessian - mean))),
        'client_reconstruction': recon,
    }
