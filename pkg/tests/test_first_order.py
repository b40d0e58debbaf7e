from unittest import TestCase

import numpy as np

from basiskit.algorithms import METHODS, fednl_adapter, get_method
from basiskit.algorithms.base import MethodContext
from basiskit.algorithms.first_order import (
    diana_init,
    diana_rates,
    diana_shift_residual,
    diana_step,
    gd_init,
    gd_step,
)
from basiskit.algorithms.newton import newton_init, newton_step
from basiskit.exceptions import ConfigError
from basiskit.models.config import Algorithm, BasisTag, CompressorKind, CompressorSpec
from basiskit.problems import QuadraticProblem, newton_reference
from tests.utils import small_logistic, synth_config


class TestGd(TestCase):
    def test_monotone(self):
        problem = small_logistic()
        ctx = MethodContext(problem, synth_config(d=5, n=3, algorithm='gd'))
        state = gd_init(ctx, problem.zero())
        value = problem.global_value(state.x)
        for _ in range(20):
            state, cost = gd_step(state, ctx)
            current = problem.global_value(state.x)
            self.assertLessEqual(current, value + 1e-15)
            value = current
        self.assertEqual(cost.up_per_node, 5 * 64)
        self.assertEqual(cost.down_per_node, 5 * 64)

    def test_configured_stepsize(self):
        problem = small_logistic()
        ctx = MethodContext(problem, synth_config(d=5, n=3, stepsize=0.5))
        self.assertEqual(gd_init(ctx, problem.zero()).stepsize, 0.5)


class TestDiana(TestCase):
    def test_identity_compressor_is_gd(self):
        problem = small_logistic()
        config = synth_config(d=5, n=3, gradient_compressor=CompressorSpec(kind=CompressorKind.IDENTITY), stepsize=0.3)
        ctx = MethodContext(problem, config)
        diana = diana_init(ctx, problem.zero())
        gd = gd_init(ctx, problem.zero())
        self.assertEqual(diana.shift_rate, 1.0)
        for _ in range(5):
            diana, _ = diana_step(diana, ctx)
            gd, _ = gd_step(gd, ctx)
        np.testing.assert_allclose(diana.x, gd.x, atol=1e-12)

    def test_rates(self):
        problem = small_logistic()
        ctx = MethodContext(problem, synth_config(d=5, n=3, gradient_compressor=CompressorSpec(kind='rand_k', k=1)))
        alpha, gamma = diana_rates(ctx, problem.zero())
        self.assertAlmostEqual(alpha, 0.2)
        self.assertLessEqual(gamma, alpha / (2 * ctx.lam))

    def test_biased_compressor_rejected(self):
        problem = small_logistic()
        ctx = MethodContext(problem, synth_config(d=5, n=3, gradient_compressor=CompressorSpec(kind='top_k', k=2)))
        with self.assertRaises(ConfigError):
            diana_init(ctx, problem.zero())

    def test_stationary_point(self):
        problem = QuadraticProblem([np.eye(3)] * 2, [np.zeros(3)] * 2, lam=0.1)
        ctx = MethodContext(problem, synth_config(d=3, n=2))
        state = diana_init(ctx, problem.zero())
        state, _ = diana_step(state, ctx)
        np.testing.assert_array_equal(state.x, np.zeros(3))
        self.assertEqual(diana_shift_residual(state, ctx, state.x), 0.0)

    def test_shifts_learn_gradients(self):
        problem = small_logistic(lam=0.1)
        ctx = MethodContext(problem, synth_config(d=5, n=3))
        state = diana_init(ctx, problem.zero())
        for _ in range(400):
            state, _ = diana_step(state, ctx)
        x_star = newton_reference(problem).x_star
        self.assertLess(np.linalg.norm(state.x - x_star), 1e-3)
        self.assertLess(diana_shift_residual(state, ctx, x_star), 1e-2)


class TestNewton(TestCase):
    def test_subspace_cost(self):
        problem = small_logistic(m=3, d=6)
        ctx = MethodContext(problem, synth_config(d=6, n=3, basis=BasisTag.SUBSPACE))
        state, cost = newton_step(newton_init(ctx, problem.zero()), ctx)
        self.assertEqual(cost.breakdown['up:hessian'], 3 * 3 * 3 * 64)
        self.assertEqual(cost.breakdown['up:gradient'], 3 * 6 * 64)
        dense = MethodContext(problem, synth_config(d=6, n=3))
        expected, _ = newton_step(newton_init(dense, problem.zero()), dense)
        np.testing.assert_allclose(state.x, expected.x, atol=1e-10)

    def test_gradient_in_basis(self):
        problem = small_logistic(m=3, d=6)
        ctx = MethodContext(problem, synth_config(d=6, n=3, basis=BasisTag.SUBSPACE, gradient_in_basis=True))
        _, cost = newton_step(newton_init(ctx, problem.zero()), ctx)
        self.assertEqual(cost.breakdown['up:gradient'], 3 * 3 * 64)


class TestRegistry(TestCase):
    def test_methods(self):
        self.assertTrue(METHODS[Algorithm.BL3].symmetric_grids)
        self.assertFalse(METHODS[Algorithm.BL1].symmetric_grids)
        with self.assertRaises(ConfigError):
            get_method(Algorithm.FEDNL)

    def test_fednl(self):
        config = synth_config(
            algorithm='fednl', basis='psd', p=0.3,
            matrix_compressor=CompressorSpec(kind='top_k', k=2),
            model_compressor=CompressorSpec(kind='top_k', k=1),
        )
        lowered = fednl_adapter(config)
        self.assertEqual(lowered.algorithm, Algorithm.BL1)
        self.assertEqual(lowered.basis, BasisTag.STANDARD)
        self.assertEqual(lowered.p, 1.0)
        self.assertEqual(lowered.eta, 1.0)
        self.assertEqual(lowered.model_compressor.kind, CompressorKind.IDENTITY)
        self.assertTrue(lowered.matrix_compressor.symmetrize)
        self.assertEqual(fednl_adapter(lowered), lowered)

    def test_fednl_variants(self):
        bc = fednl_adapter(synth_config(algorithm='fednl_bc', model_compressor=CompressorSpec(kind='top_k', k=1)))
        self.assertEqual(bc.algorithm, Algorithm.BL1)
        self.assertEqual(bc.model_compressor.kind, CompressorKind.TOP_K)
        pp = fednl_adapter(synth_config(algorithm='fednl_pp', tau=2, matrix_compressor=CompressorSpec(kind='top_k_sym', k=2)))
        self.assertEqual(pp.algorithm, Algorithm.BL2)
        self.assertEqual(pp.tau, 2)
        self.assertFalse(pp.matrix_compressor.symmetrize)
