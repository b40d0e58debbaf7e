from __future__ import annotations

import logging
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, conint

from basiskit.algorithms.base import MethodContext, check_finite
from basiskit.compressors import Identity
from basiskit.matrix import as_symmetric, solve_spd
from basiskit.models.records import CostLedger, RoundCost

logger = logging.getLogger(__name__)


class NewtonState(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    round: conint(ge=0)
    x: np.ndarray


def newton_init(ctx: MethodContext, x0: np.ndarray) -> NewtonState:
    return NewtonState(round=0, x=np.asarray(x0, dtype=float).copy())


def newton_step(state: NewtonState, ctx: MethodContext) -> Tuple[NewtonState, RoundCost]:
    """
    Distributed Newton: every client uploads the active block of its Hessian
    coefficients in full plus its gradient, the server broadcasts x.
    With the standard basis this is d² + d floats up per client.
    """
    k = state.round
    x = state.x
    ledger = CostLedger(ctx.n)
    identity = Identity(ctx.float_bits)

    def client(i: int):
        basis = ctx.bases[i]
        block, cost = identity.compress(basis.block(basis.coeffs(ctx.problem.data_hess(i, x))))
        return basis.reconstruct(basis.embed(block)), ctx.problem.local_grad(i, x), cost

    results = ctx.map(client, range(ctx.n))
    for i, (_, _, cost) in enumerate(results):
        ledger.send_up(i, 'hessian', cost.total)
        if ctx.config.gradient_in_basis:
            ledger.send_up(i, 'gradient', ctx.bases[i].active * ctx.float_bits)
        else:
            ledger.send_up(i, 'gradient', ctx.vector_bits)

    hessian = as_symmetric(np.mean([r[0] for r in results], axis=0)) + ctx.lam * np.eye(ctx.d)
    grad = np.mean([r[1] for r in results], axis=0)
    x_next = x - solve_spd(hessian, grad)
    check_finite(x_next, f'Newton iterate at round {k}')
    for i in range(ctx.n):
        ledger.send_down(i, 'model', ctx.vector_bits)
    return NewtonState(round=k + 1, x=x_next), ledger.close()
