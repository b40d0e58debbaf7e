from __future__ import annotations

import logging
import math
from typing import Callable, Dict, List

import numpy as np

from basiskit.algorithms import MethodContext
from basiskit.algorithms.base import build_bases
from basiskit.algorithms.bl1 import bl1_init, bl1_step
from basiskit.algorithms.bl2 import bl2_init, bl2_min_eigenvalues, bl2_residuals, bl2_step
from basiskit.algorithms.bl3 import bl3_dominance, bl3_init, bl3_residuals, bl3_step
from basiskit.algorithms.newton import newton_init, newton_step
from basiskit.basis import (
    data_subspace_basis,
    outer_product_rank,
    psd_subspace_basis,
    psd_sym_basis,
    standard_basis,
    subspace_matrix_basis,
    triangular_sym_basis,
)
from basiskit.compressors import (
    ComposedRankUnbiased,
    ComposedTopUnbiased,
    Compressor,
    Identity,
    Natural,
    RandK,
    RandomDithering,
    RankR,
    TopK,
    TopKSym,
    certify,
)
from basiskit.exceptions import ConfigError
from basiskit.harness import bits_to_gap, cost_report, run
from basiskit.libsvm import a1a_subset, load_problem
from basiskit.matrix import frobenius_norm
from basiskit.models.config import Algorithm, BasisTag, CompressorKind, CompressorSpec, RunConfig, SynthSpec
from basiskit.models.records import CheckResult, VerifyReport
from basiskit.problems import newton_iterates, newton_reference, synth_lowdim
from basiskit.rng import Purpose, stream

logger = logging.getLogger(__name__)

TOL = 1e-8


def _check(name: str, measured: float, bound: float) -> CheckResult:
    measured = float(measured)
    return CheckResult(name=name, passed=bool(measured <= bound), measured=measured, bound=float(bound))


def shipped_compressors(d: int) -> List[Compressor]:
    n = d * d
    return [
        Identity(),
        TopK(max(1, n // 4)),
        TopKSym(max(1, d * (d + 1) // 4)),
        RandK(max(1, n // 4)),
        RankR(max(1, d // 2)),
        RandomDithering(),
        RandomDithering(norm='inf'),
        Natural(),
        ComposedRankUnbiased(1, RandomDithering(), RandomDithering()),
        ComposedRankUnbiased(1, Natural(), Natural(), scaling='sqrt_sigma'),
        ComposedTopUnbiased(max(1, n // 4), RandomDithering()),
        ComposedTopUnbiased(max(1, n // 4), Natural()),
    ]


def verify_compressors(trials: int = 10_000, dims=(2, 4, 8), seed: int = 0) -> List[CheckResult]:
    checks = []
    for d in dims:
        for compressor in shipped_compressors(d):
            report = certify(compressor, trials=trials, shapes=((d, d),), seed=seed)
            checks.extend(report.checks)
    return checks


def _random_input(rng: np.random.Generator, d: int, symmetric: bool) -> np.ndarray:
    a = rng.standard_normal((d, d))
    return 0.5 * (a + a.T) if symmetric else a


def verify_basis(samples: int = 250, dims=(3, 6, 12, 20), families: int = 100, seed: int = 0) -> List[CheckResult]:
    checks = []
    for d in dims:
        rng = stream(seed, 0, d, Purpose.MONTE_CARLO)
        r = max(1, d // 3)
        subspace = data_subspace_basis(rng.standard_normal((2 * r, r)) @ rng.standard_normal((r, d)))
        bases = [
            standard_basis(d),
            triangular_sym_basis(d),
            psd_sym_basis(d),
            subspace_matrix_basis(subspace, d),
            psd_subspace_basis(subspace, d),
        ]
        for basis in bases:
            worst = 0.0
            for _ in range(samples):
                a = _random_input(rng, d, basis.symmetric)
                back = basis.reconstruct(basis.coeffs(a))
                worst = max(worst, float(np.max(np.abs(back - a))) / (1.0 + float(np.max(np.abs(a)))))
            checks.append(_check(f'{basis!r} reconstruct(coeffs(A)) = A', worst, 1e-9))
            if d <= 6:
                a = _random_input(rng, d, basis.symmetric)
                gap = float(np.max(np.abs(basis.coeffs(a) - basis.solve_coeffs(a))))
                checks.append(_check(f'{basis!r} closed form matches transition solve', gap, 1e-9))

        # Hessian-form matrices keep their coefficients in the leading r×r block
        basis = subspace_matrix_basis(subspace, d)
        v = subspace.vectors
        gamma = rng.standard_normal((subspace.r, subspace.r))
        grid = basis.coeffs(v @ gamma @ v.T)
        outside = grid.copy()
        outside[:subspace.r, :subspace.r] = 0.0
        checks.append(_check(f'{basis!r} coefficients outside the active block', np.max(np.abs(outside)), 1e-9))

    rng = stream(seed, 1, 0, Purpose.MONTE_CARLO)
    failures = 0
    for _ in range(families):
        d = int(rng.integers(2, 11))
        r = int(rng.integers(1, d + 1))
        q, _ = np.linalg.qr(rng.standard_normal((d, r)))
        failures += outer_product_rank(q) != r * r
    checks.append(_check(f'outer products of {families} orthonormal families have rank r²', failures, 0))
    return checks


def _step_slack(q: Compressor, rate: float, contractive: bool, x, y, z, rng) -> float:
    """
    One step z + rate·Q(x − z) measured against y, as slack over the bound
    scaled by ‖z − y‖² + ‖x − y‖². Non-positive when the bound holds.
    """
    out, _ = q.compress(x - z, rng)
    lhs = frobenius_norm(z + rate * out - y) ** 2
    zy = frobenius_norm(z - y) ** 2
    xy = frobenius_norm(x - y) ** 2
    if contractive:
        delta = q.contraction(np.shape(x))
        rhs = (1.0 - delta / 4.0) * zy + (6.0 / delta - 3.5) * xy
    else:
        rhs = (1.0 - rate) * zy + rate * xy
    return (lhs - rhs) / max(zy + xy, 1e-300)


def _slack_check(name: str, slacks: List[float], stochastic: bool) -> CheckResult:
    # deterministic compressors obey the bound per draw, stochastic ones on average
    slacks = np.asarray(slacks)
    if not stochastic:
        return _check(name, slacks.max(), 1e-12)
    se = float(slacks.std(ddof=1)) / math.sqrt(slacks.size)
    return _check(name, slacks.mean(), 3.0 * se)


def _hessian_steps(triples: int, seed: int) -> List[CheckResult]:
    """
    The same steps on coefficient grids: L + αC(h(y) − L) against h(z), where
    h is a client's Hessian in its data basis.
    """
    problem = synth_lowdim(6, 3, 2, 20, seed)
    bases = build_bases(problem, BasisTag.SUBSPACE)
    rng = stream(seed, 2, 0, Purpose.MONTE_CARLO)
    checks = []
    for q in (TopK(2), RandK(2)):
        declared = q.declared((bases[0].active, bases[0].active))
        slacks = []
        for _ in range(triples):
            i = int(rng.integers(problem.n))
            basis = bases[i]
            r = basis.active
            y, z = rng.standard_normal((2, problem.d))
            at_y = basis.block(basis.coeffs(problem.data_hess(i, y)))
            at_z = basis.block(basis.coeffs(problem.data_hess(i, z)))
            shift = at_z + rng.standard_normal((r, r)) * frobenius_norm(at_y - at_z) / r
            rate = q.default_rate((r, r))
            slacks.append(_step_slack(q, rate, declared.contractive, at_y, at_z, shift, rng))
        kind = 'contractive' if declared.contractive else 'unbiased'
        checks.append(_slack_check(f'{kind} Hessian step {q!r} over {triples} triples', slacks, q.stochastic))
    return checks


def verify_lemmas(samples: int = 10_000, triples: int = 1000, d: int = 8, seed: int = 0) -> List[CheckResult]:
    """
    One step z + ηQ(x − z) measured against y. Unbiased compressors are
    averaged over draws at a fixed triple, contractive ones are sampled over
    random triples.
    """
    rng = stream(seed, 0, 0, Purpose.MONTE_CARLO)
    x, y, z = rng.standard_normal((3, d))
    zy = float(np.sum((z - y) ** 2))
    xy = float(np.sum((x - y) ** 2))
    checks = []

    for q in (RandomDithering(), RandomDithering(norm='inf'), RandK(max(1, d // 4)), Natural()):
        omega = q.variance((d,))
        eta = 1.0 / (omega + 1.0)
        draws = np.array([
            float(np.sum((z + eta * q.compress(x - z, rng)[0] - y) ** 2)) for _ in range(samples)
        ])
        mean = float(draws.mean())
        se = float(draws.std(ddof=1)) / math.sqrt(samples)
        bound = (1.0 - eta) * zy + eta * xy
        checks.append(_check(f'unbiased step {q!r} eta={eta:.4g}', mean, bound + 3.0 * se))

    side = 4
    rng = stream(seed, 1, 0, Purpose.MONTE_CARLO)
    for q in shipped_compressors(side):
        if not q.declared((side, side)).contractive:
            continue
        slacks = []
        for _ in range(triples):
            xs, ys, zs = (_random_input(rng, side, q.symmetric_only) for _ in range(3))
            slacks.append(_step_slack(q, 1.0, True, xs, ys, zs, rng))
        checks.append(_slack_check(f'contractive step {q!r} over {triples} triples', slacks, q.stochastic))

    checks.extend(_hessian_steps(triples, seed))
    return checks


def _synth_config(d: int, r: int, n: int, m: int, **kwargs) -> RunConfig:
    return RunConfig(synth=SynthSpec(d=d, r=r, m=m), n=n, **kwargs)


def _a1a_config(seed: int, **kwargs) -> RunConfig:
    # pairs with a1a_subset(); callers pass that problem explicitly
    return RunConfig(dataset_name='a1a', rows=400, n=4, lam=1e-3, seed=seed, **kwargs)


def verify_newton(rounds: int = 10, seed: int = 0) -> List[CheckResult]:
    checks = []

    # BL1 with exact messages reproduces Newton
    problem = a1a_subset(seed=seed)
    config = _a1a_config(seed, algorithm=Algorithm.BL1, alpha=1.0, eta=1.0)
    ctx = MethodContext(problem, config)
    try:
        expected = newton_iterates(problem, problem.zero(), rounds)
        state = bl1_init(ctx, problem.zero())
        worst = 0.0
        projected = 0
        for k in range(rounds):
            state, _ = bl1_step(state, ctx)
            worst = max(worst, float(np.max(np.abs(state.x - expected[k + 1]))))
            projected += state.projection_active
    finally:
        ctx.close()
    checks.append(_check('BL1 with identity compressors matches Newton', worst, TOL))
    checks.append(_check('BL1 projection stays inactive', projected, 0))

    # Newton in the data basis is lossless and ships r² + d floats
    d, r = 100, 10
    dense = _synth_config(d, r, 4, 40, seed=seed, algorithm=Algorithm.NEWTON)
    lean = dense.model_copy(update={'basis': BasisTag.SUBSPACE})
    problem = load_problem(dense)
    ctx_dense = MethodContext(problem, dense)
    ctx_lean = MethodContext(problem, lean)
    try:
        a = newton_init(ctx_dense, problem.zero())
        b = newton_init(ctx_lean, problem.zero())
        worst = 0.0
        for _ in range(rounds):
            a, _ = newton_step(a, ctx_dense)
            b, _ = newton_step(b, ctx_lean)
            worst = max(worst, float(np.max(np.abs(a.x - b.x))))
    finally:
        ctx_dense.close()
        ctx_lean.close()
    checks.append(_check('Newton in the data basis matches dense Newton', worst, TOL))
    dense_floats = cost_report(dense, problem).up_floats
    lean_floats = cost_report(lean, problem).up_floats
    checks.append(_check(f'dense Newton uploads d²+d = {d * d + d} floats', abs(dense_floats - (d * d + d)), 0))
    checks.append(_check(f'data-basis Newton uploads r²+d = {r * r + d} floats', abs(lean_floats - (r * r + d)), 0))

    checks.extend(verify_superlinear(seed=seed))
    return checks


def superlinear_ratios(rounds: int = 30, warm_start: int = 5, seed: int = 0) -> List[float]:
    """
    ‖x^{k+1} − x*‖ / ‖x^k − x*‖ for BL1 with Top-K(K=r) in the data basis,
    started at a Newton iterate. Stops once the distance reaches the
    floating-point floor around x*.
    """
    config = _synth_config(
        30, 6, 4, 50, seed=seed, algorithm=Algorithm.BL1, basis=BasisTag.SUBSPACE,
        matrix_compressor=CompressorSpec(kind=CompressorKind.TOP_K, k='r'),
    )
    problem = load_problem(config)
    reference = newton_reference(problem)
    x0 = newton_iterates(problem, problem.zero(), warm_start)[-1]
    floor = 1e-11 * (1.0 + float(np.linalg.norm(reference.x_star)))
    ctx = MethodContext(problem, config)
    ratios = []
    try:
        state = bl1_init(ctx, x0)
        dist = float(np.linalg.norm(state.x - reference.x_star))
        for _ in range(rounds):
            if dist <= floor:
                break
            state, _ = bl1_step(state, ctx)
            nxt = float(np.linalg.norm(state.x - reference.x_star))
            ratios.append(nxt / dist)
            dist = nxt
    finally:
        ctx.close()
    logger.debug(f'superlinear ratios from Newton iterate {warm_start}: {ratios}')
    return ratios


def verify_superlinear(rounds: int = 30, warm_start: int = 5, tail: int = 5, seed: int = 0) -> List[CheckResult]:
    """
    The distance ratio falls below 0.05 within the round limit and does not
    increase over its last recorded values.
    """
    ratios = superlinear_ratios(rounds, warm_start, seed)
    if not ratios:
        return [_check(f'BL1 superlinear: Newton iterate {warm_start} already at x*', 0.0, 0.05)]
    last = ratios[-tail:]
    rise = max((b - a for a, b in zip(last, last[1:])), default=0.0)
    return [
        _check(f'BL1 superlinear: distance ratio reaches 0.05 within {rounds} rounds', min(ratios), 0.05),
        _check(f'BL1 superlinear: ratio non-increasing over the last {len(last)} rounds', rise, 0.0),
    ]


def _run_rounds(init, step, ctx, rounds, each):
    state = init(ctx, ctx.problem.zero())
    each(state)
    for _ in range(rounds):
        state, _ = step(state, ctx)
        each(state)
    return state


def verify_bl2(rounds: int = 100, seed: int = 0) -> List[CheckResult]:
    problem = a1a_subset(seed=seed)
    d = problem.d
    config = _a1a_config(
        seed, algorithm=Algorithm.BL2, tau=2, p=0.5,
        matrix_compressor=CompressorSpec(kind=CompressorKind.TOP_K, k=d * d // 2),
        model_compressor=CompressorSpec(kind=CompressorKind.TOP_K, k=d // 2),
    )
    reference = newton_reference(problem)
    ctx = MethodContext(problem, config)
    worst = {}
    lowest = [math.inf]

    def each(state):
        for key, value in bl2_residuals(state, ctx).items():
            worst[key] = max(worst.get(key, 0.0), value)
        lowest[0] = min(lowest[0], min(bl2_min_eigenvalues(state, ctx)))

    try:
        state = _run_rounds(bl2_init, bl2_step, ctx, rounds, each)
    finally:
        ctx.close()
    checks = [_check(f'BL2 {key}', value, TOL) for key, value in sorted(worst.items())]
    checks.append(_check('BL2 lambda_min([H_i]_s + l_i I + lambda I) >= lambda', ctx.lam - lowest[0], TOL))
    checks.append(_check('BL2 reaches f gap 1e-6', problem.global_value(state.x) - reference.f_star, 1e-6))
    return checks


def verify_bl3(rounds: int = 150, seed: int = 0) -> List[CheckResult]:
    problem = a1a_subset(seed=seed)
    d = problem.d
    reference = newton_reference(problem)
    checks = []
    for option in (2, 1):
        config = _a1a_config(
            seed, algorithm=Algorithm.BL3, basis=BasisTag.PSD, c=0.1, option=option,
            matrix_compressor=CompressorSpec(kind=CompressorKind.TOP_K, k=d * d // 2),
        )
        ctx = MethodContext(problem, config, symmetric_grids=True)
        worst = {}
        lowest = [math.inf]

        def each(state):
            for key, value in bl3_residuals(state, ctx).items():
                if key == 'coefficient_floor':
                    worst[key] = max(worst.get(key, 0.0), -value)
                else:
                    worst[key] = max(worst.get(key, 0.0), value)
            lowest[0] = min(lowest[0], min(bl3_dominance(state, ctx)))

        try:
            state = _run_rounds(bl3_init, bl3_step, ctx, rounds, each)
        finally:
            ctx.close()
        checks.extend(_check(f'BL3 option {option} {key}', value, TOL) for key, value in sorted(worst.items()))
        checks.append(_check(f'BL3 option {option} dominance over the local Hessian', -lowest[0], TOL))
        if option == 2:
            gap = problem.global_value(state.x) - reference.f_star
            checks.append(_check('BL3 option 2 reaches f gap 1e-6', gap, 1e-6))
    return checks


def verify_bit_savings(gap: float = 1e-6, factor: float = 10.0, max_rounds: int = 500, seed: int = 0) -> List[CheckResult]:
    """
    BL1 with Top-K reaches the gap on a tenth of the up+down bits per node
    that GD and DIANA need. The first-order runs are capped at factor times
    the BL1 spend, so a capped run counts as a pass.
    """
    problem = a1a_subset(seed=seed)
    reference = newton_reference(problem)
    base = _a1a_config(seed, target_gap=gap, max_rounds=max_rounds)
    bl1 = run(
        base.model_copy(update={
            'algorithm': Algorithm.BL1,
            'matrix_compressor': CompressorSpec(kind=CompressorKind.TOP_K, k='r'),
        }),
        problem=problem,
        reference=reference,
    )
    spent = bits_to_gap(bl1.records, gap)
    checks = [_check(f'BL1 Top-K reaches f gap {gap:g} in {max_rounds} rounds', bl1.records[-1].fgap, gap)]
    if spent is None:
        return checks
    for algorithm in (Algorithm.GD, Algorithm.DIANA):
        other = run(
            base.model_copy(update={'algorithm': algorithm, 'max_rounds': 10 ** 6, 'max_bits': factor * spent}),
            problem=problem,
            reference=reference,
        )
        needed = bits_to_gap(other.records, gap)
        # measured is the BL1 share of the bits, scaled by the required factor
        share = 0.0 if needed is None else factor * spent / needed
        checks.append(_check(f'{algorithm.value} needs {factor:g}x the BL1 bits to f gap {gap:g}', share, 1.0))
    return checks


SUITES: Dict[str, Callable[[], List[CheckResult]]] = {
    'compressors': verify_compressors,
    'basis': verify_basis,
    'lemmas': verify_lemmas,
    'newton': verify_newton,
    'bl2': verify_bl2,
    'bl3': verify_bl3,
    'savings': verify_bit_savings,
}


def verify(suite: str = 'all') -> VerifyReport:
    """
    Runs one suite by name, or every suite for "all". Failed checks are
    report entries, not exceptions.
    """
    if suite == 'all':
        names = list(SUITES)
    elif suite in SUITES:
        names = [suite]
    else:
        raise ConfigError(f'unknown suite {suite}; known: all, {", ".join(SUITES)}')
    report = VerifyReport(suite=suite)
    for name in names:
        logger.info(f'verify: running {name}')
        part = VerifyReport(suite=name, checks=SUITES[name]())
        for check in part.checks:
            if not check.passed:
                logger.warning(f'verify {name}: {check.name} failed ({check.measured:.3e} > {check.bound:.3e})')
        report = report.extend(part)
    return report
