from unittest import TestCase

import numpy as np
from pydantic import ValidationError

from basiskit.basis import (
    BasisKind,
    Space,
    SubspaceBasis,
    data_subspace_basis,
    from_elements,
    outer_product_rank,
    psd_subspace_basis,
    psd_sym_basis,
    standard_basis,
    subspace_matrix_basis,
    triangular_sym_basis,
)
from basiskit.exceptions import BasisError
from basiskit.matrix import as_symmetric


def low_rank_features(m: int = 12, d: int = 6, r: int = 2, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((m, r)) @ rng.standard_normal((r, d))


class TestClosedFormBases(TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(7)

    def test_standard_round_trip(self):
        basis = standard_basis(4)
        a = self.rng.standard_normal((4, 4))
        np.testing.assert_array_equal(basis.coeffs(a), a)
        np.testing.assert_array_equal(basis.reconstruct(basis.coeffs(a)), a)
        self.assertTrue(basis.orthogonal)
        self.assertEqual(basis.n_b, 1)

    def test_triangular_round_trip(self):
        basis = triangular_sym_basis(5)
        a = self.rng.standard_normal((5, 5))
        np.testing.assert_allclose(basis.reconstruct(basis.coeffs(a)), a, atol=1e-12)

    def test_triangular_symmetric_input_has_lower_coefficients(self):
        basis = triangular_sym_basis(4)
        a = as_symmetric(self.rng.standard_normal((4, 4)))
        np.testing.assert_array_equal(np.triu(basis.coeffs(a), 1), np.zeros((4, 4)))

    def test_psd_round_trip(self):
        basis = psd_sym_basis(4)
        a = as_symmetric(self.rng.standard_normal((4, 4)))
        np.testing.assert_allclose(basis.reconstruct(basis.coeffs(a)), a, atol=1e-12)
        self.assertTrue(basis.psd)
        self.assertFalse(basis.orthogonal)

    def test_psd_elements_are_psd(self):
        for b in psd_sym_basis(3).elements():
            self.assertGreaterEqual(np.linalg.eigvalsh(b)[0], -1e-12)

    def test_closed_form_matches_transition_solve(self):
        for basis in (triangular_sym_basis(3), psd_sym_basis(3)):
            a = self.rng.standard_normal((3, 3))
            if basis.symmetric:
                a = as_symmetric(a)
            np.testing.assert_allclose(basis.coeffs(a), basis.solve_coeffs(a), atol=1e-10)

    def test_symmetric_basis_rejects_asymmetric(self):
        with self.assertRaises(BasisError):
            psd_sym_basis(2).coeffs(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_wrong_size(self):
        with self.assertRaises(BasisError):
            standard_basis(3).coeffs(np.eye(2))

    def test_transition_too_large(self):
        with self.assertRaises(BasisError):
            standard_basis(41).transition()

    def test_conditioning(self):
        self.assertEqual(standard_basis(5).conditioning().inv_norm_2, 1.0)
        cond = psd_sym_basis(3).conditioning()
        self.assertGreater(cond.inv_norm_inf, 1.0)
        self.assertEqual(cond.max_element_norm, 2.0)


class TestGenericBasis(TestCase):
    def test_from_elements(self):
        elements = [np.eye(2), np.array([[0.0, 1.0], [0.0, 0.0]]),
                    np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([[1.0, 0.0], [0.0, -1.0]])]
        basis = from_elements(elements)
        self.assertEqual(basis.kind, BasisKind.GENERIC)
        a = np.array([[3.0, 1.0], [2.0, -1.0]])
        np.testing.assert_allclose(basis.reconstruct(basis.coeffs(a)), a, atol=1e-12)

    def test_dependent_elements(self):
        elements = [np.eye(2)] * 4
        with self.assertRaises(BasisError):
            from_elements(elements)

    def test_wrong_count(self):
        with self.assertRaises(BasisError):
            from_elements([np.eye(2)])

    def test_symmetric_space_needs_symmetric_elements(self):
        elements = [np.eye(2), np.array([[0.0, 1.0], [0.0, 0.0]]), np.diag([0.0, 1.0])]
        with self.assertRaises(BasisError):
            from_elements(elements, Space.SYMMETRIC)


class TestSubspace(TestCase):
    def test_data_subspace_rank(self):
        subspace = data_subspace_basis(low_rank_features())
        self.assertEqual(subspace.r, 2)
        self.assertEqual(subspace.d, 6)
        self.assertEqual(outer_product_rank(subspace.vectors), 4)

    def test_zero_data(self):
        with self.assertRaises(BasisError):
            data_subspace_basis(np.zeros((3, 4)))

    def test_not_orthonormal(self):
        with self.assertRaises(ValidationError):
            SubspaceBasis(vectors=np.ones((3, 2)))

    def test_data_hessian_lives_in_active_block(self):
        features = low_rank_features()
        hessian = features.T @ np.diag(np.linspace(0.1, 1.0, 12)) @ features
        for builder in (subspace_matrix_basis, psd_subspace_basis):
            basis = builder(data_subspace_basis(features))
            self.assertEqual(basis.active, 2)
            g = basis.coeffs(hessian)
            outside = g.copy()
            outside[:2, :2] = 0.0
            self.assertLess(np.max(np.abs(outside)), 1e-9 * np.max(np.abs(hessian)))
            np.testing.assert_allclose(basis.reconstruct(basis.embed(basis.block(g))), hessian, atol=1e-9)

    def test_dimension_mismatch(self):
        subspace = data_subspace_basis(low_rank_features())
        with self.assertRaises(BasisError):
            subspace_matrix_basis(subspace, d=5)
