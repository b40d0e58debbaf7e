from __future__ import annotations

import logging
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, confloat, conint

from basiskit.algorithms.base import MethodContext, check_finite
from basiskit.exceptions import ConfigError
from basiskit.models.records import CostLedger, RoundCost
from basiskit.problems import smoothness_constant
from basiskit.rng import Purpose

logger = logging.getLogger(__name__)


class FirstOrderState(BaseModel):
    """
    shifts are DIANA's per-client gradient estimates h_i; GD keeps them empty.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    round: conint(ge=0)
    x: np.ndarray
    stepsize: confloat(gt=0)
    shifts: List[np.ndarray] = []
    shift_mean: Optional[np.ndarray] = None
    shift_rate: confloat(gt=0, le=1) = 1.0


def gd_stepsize(ctx: MethodContext, x0: np.ndarray) -> float:
    """
    1/L with L = λ_max(∇²φ(x⁰)) + λ.
    """
    if ctx.config.stepsize is not None:
        return ctx.config.stepsize
    return 1.0 / (smoothness_constant(ctx.problem, x0, seed=ctx.seed) + ctx.lam)


def diana_rates(ctx: MethodContext, x0: np.ndarray) -> Tuple[float, float]:
    """
    Returns (shift rate α, stepsize γ):
    α = 1/(ω+1), γ = min(α/(2λ), 1/(L(1 + 6ω/n))).
    """
    declared = ctx.gradient_compressor.declared((ctx.d,))
    if not declared.unbiased:
        raise ConfigError(f'DIANA needs an unbiased gradient compressor, got {ctx.gradient_compressor!r}')
    omega = declared.omega
    alpha = 1.0 / (omega + 1.0)
    if ctx.config.stepsize is not None:
        return alpha, ctx.config.stepsize
    smoothness = smoothness_constant(ctx.problem, x0, seed=ctx.seed) + ctx.lam
    gamma = min(alpha / (2.0 * ctx.lam), 1.0 / (smoothness * (1.0 + 6.0 * omega / ctx.n)))
    return alpha, gamma


def gd_init(ctx: MethodContext, x0: np.ndarray) -> FirstOrderState:
    x0 = np.asarray(x0, dtype=float)
    stepsize = gd_stepsize(ctx, x0)
    logger.debug(f'GD stepsize {stepsize:.6e}')
    return FirstOrderState(round=0, x=x0.copy(), stepsize=stepsize)


def gd_step(state: FirstOrderState, ctx: MethodContext) -> Tuple[FirstOrderState, RoundCost]:
    k = state.round
    ledger = CostLedger(ctx.n)
    grads = ctx.map(lambda i: ctx.problem.local_grad(i, state.x), range(ctx.n))
    for i in range(ctx.n):
        ledger.send_up(i, 'gradient', ctx.vector_bits)
        ledger.send_down(i, 'model', ctx.vector_bits)
    x = state.x - state.stepsize * np.mean(grads, axis=0)
    check_finite(x, f'GD iterate at round {k}')
    return state.model_copy(update={'round': k + 1, 'x': x}), ledger.close()


def diana_init(ctx: MethodContext, x0: np.ndarray) -> FirstOrderState:
    x0 = np.asarray(x0, dtype=float)
    alpha, stepsize = diana_rates(ctx, x0)
    logger.debug(f'DIANA shift rate {alpha:.6e}, stepsize {stepsize:.6e}')
    zeros = [np.zeros(ctx.d) for _ in range(ctx.n)]
    return FirstOrderState(
        round=0, x=x0.copy(), stepsize=stepsize, shifts=zeros, shift_mean=np.zeros(ctx.d), shift_rate=alpha,
    )


def diana_step(state: FirstOrderState, ctx: MethodContext) -> Tuple[FirstOrderState, RoundCost]:
    """
    Δ_i = Q(∇f_i(x) − h_i), g = h + mean Δ_i, x⁺ = x − γ g, h_i⁺ = h_i + α Δ_i.
    """
    k = state.round
    ledger = CostLedger(ctx.n)

    def client(i: int):
        diff = ctx.problem.local_grad(i, state.x) - state.shifts[i]
        return ctx.gradient_compressor.compress(diff, ctx.rng(k, i, Purpose.GRADIENT))

    results = ctx.map(client, range(ctx.n))
    deltas = [r[0] for r in results]
    for i, (_, cost) in enumerate(results):
        ledger.send_up(i, 'gradient', cost.total)
        ledger.send_down(i, 'model', ctx.vector_bits)

    delta_mean = np.mean(deltas, axis=0)
    x = state.x - state.stepsize * (state.shift_mean + delta_mean)
    check_finite(x, f'DIANA iterate at round {k}')
    alpha = state.shift_rate
    nxt = state.model_copy(update={
        'round': k + 1,
        'x': x,
        'shifts': [h + alpha * delta for h, delta in zip(state.shifts, deltas)],
        'shift_mean': state.shift_mean + alpha * delta_mean,
    })
    return nxt, ledger.close()


def diana_shift_residual(state: FirstOrderState, ctx: MethodContext, x: np.ndarray) -> float:
    """
    max_i ‖h_i − ∇f_i(x)‖.
    """
    return max(float(np.linalg.norm(h - ctx.problem.local_grad(i, x))) for i, h in enumerate(state.shifts))
