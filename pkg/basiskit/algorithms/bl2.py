from __future__ import annotations

import logging
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, confloat, conint

from basiskit.algorithms.base import MethodContext, check_finite
from basiskit.matrix import as_symmetric, frobenius_norm, min_eigenvalue, solve_spd
from basiskit.models.records import CostLedger, RoundCost

logger = logging.getLogger(__name__)


class Bl2Client(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    z: np.ndarray
    w: np.ndarray
    shift: np.ndarray
    hessian: np.ndarray
    l: confloat(ge=0)
    g: np.ndarray
    xi: conint(ge=0, le=1)


class Bl2State(BaseModel):
    """
    g_i = ([H_i]_s + l_i I) w_i − ∇φ_i(w_i) is kept on every client; the
    server holds the means H, l, g built from incremental messages.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    round: conint(ge=0)
    x: np.ndarray
    clients: List[Bl2Client]
    hessian: np.ndarray
    l: float
    g: np.ndarray
    participants: List[int] = []


def _g(ctx: MethodContext, i: int, hessian: np.ndarray, l: float, w: np.ndarray) -> np.ndarray:
    return (as_symmetric(hessian) + l * np.eye(ctx.d)) @ w - ctx.problem.data_grad(i, w)


def bl2_init(ctx: MethodContext, x0: np.ndarray) -> Bl2State:
    x0 = np.asarray(x0, dtype=float)

    def client(i: int) -> Bl2Client:
        shift = ctx.initial_shift(i, x0)
        hessian = ctx.bases[i].reconstruct(shift)
        l = frobenius_norm(as_symmetric(hessian) - ctx.problem.data_hess(i, x0))
        return Bl2Client(
            z=x0.copy(), w=x0.copy(), shift=shift, hessian=hessian, l=l,
            g=_g(ctx, i, hessian, l, x0), xi=1,
        )

    clients = ctx.map(client, range(ctx.n))
    return Bl2State(
        round=0,
        x=x0.copy(),
        clients=clients,
        hessian=np.mean([c.hessian for c in clients], axis=0),
        l=float(np.mean([c.l for c in clients])),
        g=np.mean([c.g for c in clients], axis=0),
    )


def bl2_step(state: Bl2State, ctx: MethodContext) -> Tuple[Bl2State, RoundCost]:
    k = state.round
    problem = ctx.problem
    ledger = CostLedger(ctx.n)

    # server: main step, then sample and send models
    system = as_symmetric(state.hessian) + (ctx.lam + state.l) * np.eye(ctx.d)
    x = solve_spd(system, state.g)
    check_finite(x, f'BL2 iterate at round {k}')
    chosen = ctx.participants(k)
    models = {}
    for i in chosen:
        v, cost = ctx.compress_model(x - state.clients[i].z, k, i)
        models[i] = v
        ledger.send_down(i, 'model', cost.total)

    def client(i: int):
        c = state.clients[i]
        z = c.z + ctx.eta * models[i]
        hess = problem.data_hess(i, z)
        s, cost = ctx.compress_shift(i, ctx.bases[i].coeffs(hess), c.shift, k)
        delta = ctx.alpha * ctx.bases[i].reconstruct(s)
        hessian = c.hessian + delta
        l = frobenius_norm(as_symmetric(hessian) - hess)
        xi_next = ctx.bernoulli(k, i)
        w = z.copy() if c.xi == 1 else c.w
        g = _g(ctx, i, hessian, l, w)
        updated = Bl2Client(
            z=z, w=w, shift=c.shift + ctx.alpha * s, hessian=hessian, l=l, g=g, xi=xi_next,
        )
        return updated, delta, cost

    results = dict(zip(chosen, ctx.map(client, chosen)))

    hessian = state.hessian.copy()
    l_mean = state.l
    g = state.g.copy()
    clients = list(state.clients)
    for i in chosen:
        old = state.clients[i]
        new, delta, cost = results[i]
        ledger.send_up(i, 'hessian', cost.total)
        ledger.send_up(i, 'shift_l', ctx.float_bits)
        ledger.send_up(i, 'xi', 1)
        if old.xi == 1:
            ledger.send_up(i, 'gradient', ctx.vector_bits)
            dg = new.g - old.g
        else:
            dg = as_symmetric(delta) @ new.w + (new.l - old.l) * new.w
        g = g + dg / ctx.n
        hessian = hessian + delta / ctx.n
        l_mean = l_mean + (new.l - old.l) / ctx.n
        clients[i] = new

    nxt = Bl2State(round=k + 1, x=x, clients=clients, hessian=hessian, l=l_mean, g=g, participants=chosen)
    return nxt, ledger.close()


def bl2_residuals(state: Bl2State, ctx: MethodContext) -> dict:
    relation = 0.0
    for i, c in enumerate(state.clients):
        relation = max(relation, float(np.max(np.abs(c.g - _g(ctx, i, c.hessian, c.l, c.w)))))
    return {
        'g_relation': relation,
        'server_hessian': float(np.max(np.abs(state.hessian - np.mean([c.hessian for c in state.clients], axis=0)))),
        'server_l': abs(state.l - float(np.mean([c.l for c in state.clients]))),
        'server_g': float(np.max(np.abs(state.g - np.mean([c.g for c in state.clients], axis=0)))),
    }


def bl2_min_eigenvalues(state: Bl2State, ctx: MethodContext) -> List[float]:
    """
    λ_min([H_i]_s + l_i I + λI) per client.
    """
    out = []
    for c in state.clients:
        m = as_symmetric(c.hessian) + (c.l + ctx.lam) * np.eye(ctx.d)
        out.append(min_eigenvalue(m))
    return out
