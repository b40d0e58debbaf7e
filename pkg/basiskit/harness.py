from __future__ import annotations

import logging
import math
import os
import time
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ValidationError

from basiskit.algorithms import MethodContext, fednl_adapter, get_method
from basiskit.basis import Conditioning
from basiskit.exceptions import BasisError, ConfigError, NumericalError
from basiskit.libsvm import load_problem
from basiskit.models.config import Algorithm, RunConfig
from basiskit.models.problem import Reference
from basiskit.models.records import Experiment, ExperimentStatus, RunRecord
from basiskit.output import read_csv, write_csv, write_svg
from basiskit.problems import LogisticProblem, Problem, estimate_hessian_lipschitz, newton_iterates, newton_reference

logger = logging.getLogger(__name__)

LOG_EVERY = 10


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f'failed to read config {path} [{e}]')
    try:
        return RunConfig.model_validate_json(text)
    except ValidationError as e:
        raise ConfigError(f'invalid config {path} [{e}]')


def prepare(config: RunConfig, problem: Problem = None, threads: int = None):
    """
    Lowers FedNL requests, loads the problem and builds the method context.
    Every data or config error surfaces here, before round 0.
    """
    config = fednl_adapter(config)
    method = get_method(config.algorithm)
    if problem is None:
        problem = load_problem(config)
    ctx = MethodContext(problem, config, symmetric_grids=method.symmetric_grids, threads=threads)
    return config, method, ctx


def starting_point(config: RunConfig, problem: Problem) -> np.ndarray:
    if config.x0 is not None:
        x0 = np.asarray(config.x0, dtype=float)
        if x0.shape != (problem.d,):
            raise ConfigError(f'x0 has {x0.size} entries, the problem has d={problem.d}')
    else:
        x0 = problem.zero()
    if config.warm_start:
        x0 = newton_iterates(problem, x0, config.warm_start)[-1]
    return x0


def _record(problem: Problem, reference: Reference, x: np.ndarray, round: int,
            up: float, down: float, started: float) -> RunRecord:
    fgap = problem.global_value(x) - reference.f_star
    dist = float(np.linalg.norm(x - reference.x_star))
    return RunRecord(
        round=round,
        fgap=fgap,
        dist=dist,
        up_bits=up,
        down_bits=down,
        wall_ms=1000.0 * (time.perf_counter() - started),
    )


def run(config: RunConfig, problem: Problem = None, threads: int = None, reference: Reference = None) -> Experiment:
    """
    Runs one configured experiment to convergence, budget or divergence.

    up_bits/down_bits are cumulative per node; up_bits starts at the one-time
    cost of sharing rotated bases. The bit budget counts downloads only when
    count_download is set.
    """
    config, method, ctx = prepare(config, problem, threads)
    problem = ctx.problem
    if reference is None:
        reference = newton_reference(problem)
    started = time.perf_counter()
    try:
        x0 = starting_point(config, problem)
        state = method.init(ctx, x0)
        setup_bits = ctx.setup_bits()
        up = setup_bits
        down = 0.0
        records = [_record(problem, reference, state.x, 0, up, down, started)]
        status = ExperimentStatus.RUNNING
        message = None
        logger.info(f'{method.name}: n={ctx.n} d={ctx.d} f0 gap={records[0].fgap:.3e}')

        for k in range(config.max_rounds):
            last = records[-1]
            if last.fgap <= config.target_gap:
                break
            spent = last.up_bits + (last.down_bits if config.count_download else 0.0)
            if spent >= config.max_bits:
                break
            try:
                state, cost = method.step(state, ctx)
            except NumericalError as e:
                status = ExperimentStatus.DIVERGED
                message = str(e)
                break
            up += cost.up_per_node
            down += cost.down_per_node
            record = _record(problem, reference, state.x, k + 1, up, down, started)
            if not math.isfinite(record.fgap):
                status = ExperimentStatus.DIVERGED
                message = f'non-finite objective at round {k + 1}'
                break
            records.append(record)
            if (k + 1) % LOG_EVERY == 0:
                logger.info(f'{method.name} round {k + 1}: gap={record.fgap:.3e} dist={record.dist:.3e} '
                            f'bits/node={record.up_bits + record.down_bits:.4g}')
    finally:
        ctx.close()

    if status == ExperimentStatus.DIVERGED:
        logger.warning(f'{method.name} diverged: {message}')
    elif records[-1].fgap <= config.target_gap:
        status = ExperimentStatus.CONVERGED
    else:
        status = ExperimentStatus.BUDGET
    experiment = Experiment(
        config=config,
        reference=reference,
        records=records,
        status=status,
        setup_bits=setup_bits,
        message=message,
    )
    logger.info(f'{method.name} finished: {status.value} after {records[-1].round} rounds, '
                f'gap={records[-1].fgap:.3e}')

    if config.output_csv:
        write_csv(records, config.output_csv, wall_clock=config.record_wall_clock)
    if config.output_svg:
        write_svg({method.name: series_points(records, config.count_download)}, config.output_svg)
    return experiment


def series_points(records: Sequence[RunRecord], count_download: bool = True) -> List[tuple]:
    return [(r.up_bits + (r.down_bits if count_download else 0.0), r.fgap) for r in records]


def bits_to_gap(records: Sequence[RunRecord], gap: float, count_download: bool = True) -> Optional[float]:
    """
    Bits per node spent by the first record at or below the gap, None if no
    record gets there.
    """
    for bits, fgap in series_points(records, count_download):
        if fgap <= gap:
            return bits
    return None


def plot(csv_paths: Sequence[str], out: str, count_download: bool = True):
    """
    One series per CSV, named after the file.
    """
    series: Dict[str, List[tuple]] = {}
    for path in csv_paths:
        name = os.path.splitext(os.path.basename(path))[0]
        series[name] = series_points(read_csv(path), count_download)
    write_svg(series, out)


class TheoryReport(BaseModel):
    """
    Empirical Hessian smoothness and the coefficient-map constants it implies.
    Conditioning is None for bases too large to build a transition matrix.
    """
    hessian_lipschitz: float
    hessian_lipschitz_fro: float
    hessian_lipschitz_max: float
    hessian_entry_bound: float
    conditioning: List[Optional[Conditioning]]
    m1: Optional[float] = None
    m2: Optional[float] = None
    m3: Optional[float] = None
    m4: Optional[float] = None
    m5: Optional[float] = None


class CostReport(BaseModel):
    """
    Bits per participating client for one round, by message. Messages that
    only go out on some rounds (gradients on ξ = 1 rounds) are listed at the
    size they have when sent.
    """
    algorithm: Algorithm
    float_bits: int
    up: Dict[str, float]
    down: Dict[str, float]
    setup_bits: float
    theory: Optional[TheoryReport] = None

    @property
    def up_total(self) -> float:
        return sum(self.up.values())

    @property
    def down_total(self) -> float:
        return sum(self.down.values())

    @property
    def up_floats(self) -> float:
        return self.up_total / self.float_bits


def _client_mean(values: Sequence[float]) -> float:
    return float(np.mean(values))


def cost_report(config: RunConfig, problem: Problem = None, theory: bool = False) -> CostReport:
    config, method, ctx = prepare(config, problem, threads=1)
    try:
        f = ctx.float_bits
        d = ctx.d
        algorithm = config.algorithm

        def hessian_bits(i: int) -> int:
            basis = ctx.bases[i]
            shape = (basis.active, basis.active)
            return ctx.matrix_compressors[i].message_bits(
                shape, address_space=basis.size, symmetric=basis.symmetric,
            ).total

        model = float(ctx.model_compressor.message_bits((d,)).total)
        if config.gradient_in_basis:
            gradient = _client_mean([b.active * f for b in ctx.bases])
        else:
            gradient = float(ctx.vector_bits)

        if algorithm == Algorithm.BL1:
            up = {'hessian': _client_mean([hessian_bits(i) for i in range(ctx.n)]), 'gradient': gradient}
            down = {'model': model, 'xi': 1.0}
        elif algorithm == Algorithm.BL2:
            up = {
                'hessian': _client_mean([hessian_bits(i) for i in range(ctx.n)]),
                'shift_l': float(f),
                'xi': 1.0,
                'gradient': float(ctx.vector_bits),
            }
            down = {'model': model}
        elif algorithm == Algorithm.BL3:
            up = {
                'hessian': _client_mean([hessian_bits(i) for i in range(ctx.n)]),
                'beta': float(f),
                'gamma': float(f),
                'xi': 1.0,
                'gradient': 2.0 * ctx.vector_bits,
            }
            down = {'model': model}
        elif algorithm == Algorithm.NEWTON:
            up = {'hessian': _client_mean([b.active * b.active * f for b in ctx.bases]), 'gradient': gradient}
            down = {'model': float(ctx.vector_bits)}
        elif algorithm == Algorithm.GD:
            up = {'gradient': float(ctx.vector_bits)}
            down = {'model': float(ctx.vector_bits)}
        else:
            up = {'gradient': float(ctx.gradient_compressor.message_bits((d,)).total)}
            down = {'model': float(ctx.vector_bits)}

        report = CostReport(
            algorithm=algorithm,
            float_bits=f,
            up=dict(sorted(up.items())),
            down=dict(sorted(down.items())),
            setup_bits=ctx.setup_bits(),
        )
        if theory:
            report = report.model_copy(update={'theory': theory_report(ctx)})
        return report
    finally:
        ctx.close()


def _hessian_entry_bound(problem: Problem) -> float:
    """
    Bound on max |∇²φ_i(x)_jl| over x: φʺ ≤ 1/4 for the logistic loss.
    """
    if isinstance(problem, LogisticProblem):
        return max(
            0.25 * float(np.max(np.abs(shard.features).T @ np.abs(shard.features))) / shard.m
            for shard in problem.shards
        )
    return max(float(np.max(np.abs(problem.data_hess(i, problem.zero())))) for i in range(problem.n))


def theory_report(ctx: MethodContext, samples: int = 20) -> TheoryReport:
    problem = ctx.problem
    conditioning = []
    for basis in ctx.bases:
        try:
            conditioning.append(basis.conditioning())
        except BasisError as e:
            logger.debug(f'skipping conditioning of {basis!r}: {e}')
            conditioning.append(None)
    h = estimate_hessian_lipschitz(problem, samples=samples, seed=ctx.seed)
    h1 = estimate_hessian_lipschitz(problem, samples=samples, seed=ctx.seed, norm='fro')
    nu = estimate_hessian_lipschitz(problem, samples=samples, seed=ctx.seed, norm='max')
    gamma = _hessian_entry_bound(problem)
    report = TheoryReport(
        hessian_lipschitz=h,
        hessian_lipschitz_fro=h1,
        hessian_lipschitz_max=nu,
        hessian_entry_bound=gamma,
        conditioning=conditioning,
    )
    if any(c is None for c in conditioning):
        return report
    inv_2 = max(c.inv_norm_2 for c in conditioning)
    inv_inf = max(c.inv_norm_inf for c in conditioning)
    return report.model_copy(update={
        'm1': inv_2 * h1,
        'm2': nu * inv_inf,
        'm3': 2.0 * gamma * inv_inf,
        'm4': math.sqrt(2.0) * inv_2 * h1,
        'm5': 2.0 * nu * inv_inf,
    })
