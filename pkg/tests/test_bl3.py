from unittest import TestCase
from unittest.mock import patch

import numpy as np

from basiskit.algorithms.base import MethodContext
from basiskit.algorithms.bl3 import bl3_dominance, bl3_init, bl3_residuals, bl3_step
from basiskit.exceptions import BasisError
from basiskit.models.config import BasisTag, CompressorSpec
from basiskit.problems import QuadraticProblem, newton_reference
from tests.utils import small_logistic, synth_config


def psd_context(problem, **kwargs) -> MethodContext:
    config = synth_config(d=problem.d, n=problem.n, basis=BasisTag.PSD, **kwargs)
    return MethodContext(problem, config, symmetric_grids=True)


class TestBl3(TestCase):
    def test_identity_keeps_beta_at_one(self):
        problem = small_logistic()
        ctx = psd_context(problem)
        state = bl3_init(ctx, problem.zero())
        self.assertEqual(state.beta, 1.0)
        for _ in range(3):
            state, _ = bl3_step(state, ctx)
            self.assertAlmostEqual(state.beta, 1.0, places=12)

    def test_identity_matches_newton_hessian(self):
        problem = small_logistic()
        ctx = psd_context(problem)
        state = bl3_init(ctx, problem.zero())
        np.testing.assert_allclose(state.hessian, problem.global_hess(problem.zero()) - ctx.lam * np.eye(5), atol=1e-10)

    def test_gamma_floor(self):
        problem = QuadraticProblem([0.01 * np.eye(2)] * 2, [np.ones(2)] * 2, lam=0.1)
        ctx = psd_context(problem, c=0.1)
        state = bl3_init(ctx, problem.zero())
        for client in state.clients:
            self.assertEqual(client.gamma, 0.1)

    def test_empty_participation_leaves_state(self):
        problem = small_logistic()
        ctx = psd_context(problem)
        state = bl3_init(ctx, problem.zero())
        with patch.object(ctx, 'participants', return_value=[]):
            nxt, cost = bl3_step(state, ctx)
        self.assertEqual(nxt.participants, [])
        for before, after in zip(state.clients, nxt.clients):
            self.assertIs(before, after)
        np.testing.assert_array_equal(nxt.a, state.a)
        np.testing.assert_array_equal(nxt.g1, state.g1)
        self.assertEqual(sum(cost.up) + sum(cost.down), 0)

    def test_standard_basis_rejected(self):
        problem = small_logistic()
        ctx = MethodContext(problem, synth_config(d=5, n=3), symmetric_grids=True)
        with self.assertRaises(BasisError):
            bl3_init(ctx, problem.zero())

    def test_quadratic_one_step(self):
        problem = QuadraticProblem([np.diag([2.0, 1.0]), np.array([[1.0, 0.5], [0.5, 1.0]])],
                                   [np.array([1.0, 0.0]), np.array([0.0, 2.0])], lam=0.1)
        ctx = psd_context(problem)
        state, _ = bl3_step(bl3_init(ctx, problem.zero()), ctx)
        np.testing.assert_allclose(state.x, newton_reference(problem).x_star, atol=1e-10)

    def _compressed_run(self, option: int):
        problem = small_logistic(lam=0.1)
        ctx = psd_context(
            problem, option=option, tau=2, p=0.5,
            matrix_compressor=CompressorSpec(kind='top_k', k='r'),
        )
        state = bl3_init(ctx, problem.zero())
        for _ in range(10):
            state, _ = bl3_step(state, ctx)
        return state, ctx

    def test_invariants_option_2(self):
        state, ctx = self._compressed_run(2)
        residuals = bl3_residuals(state, ctx)
        self.assertGreaterEqual(residuals.pop('coefficient_floor'), -1e-12)
        for value in residuals.values():
            self.assertLess(value, 1e-9)
        for value in bl3_dominance(state, ctx):
            self.assertGreaterEqual(value, -1e-9)

    def test_invariants_option_1(self):
        state, ctx = self._compressed_run(1)
        for value in bl3_dominance(state, ctx):
            self.assertGreaterEqual(value, -1e-9)

    def test_cost_ledger(self):
        problem = small_logistic()
        ctx = psd_context(problem)
        _, cost = bl3_step(bl3_init(ctx, problem.zero()), ctx)
        self.assertEqual(cost.breakdown['up:hessian'], 3 * 15 * 64)
        self.assertEqual(cost.breakdown['up:beta'], 3 * 64)
        self.assertEqual(cost.breakdown['up:gamma'], 3 * 64)
        self.assertEqual(cost.breakdown['up:gradient'], 3 * 2 * 5 * 64)
