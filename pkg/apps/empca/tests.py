import numpy as np
from django.test import SimpleTestCase
from scipy import linalg

from apps.core.exceptions import ArgumentError, DimensionMismatchError, InsufficientSamplesError
from apps.mbn.sparse import SparseBinaryMatrix
from .subspace import EmpcaConfig, PcaModel, fit_empca, pca_project, run_empca, subspace_change


def spectrum_matrix(singular_values, n=40, seed=0):
    """Centred n x D data with known principal axes and singular values"""
    rng = np.random.default_rng(seed)
    d = len(singular_values)
    gaussian = rng.standard_normal((n, d))
    left, _ = np.linalg.qr(gaussian - gaussian.mean(axis=0))
    right, _ = np.linalg.qr(rng.standard_normal((d, d)))
    return left @ np.diag(singular_values) @ right.T, right


class EmpcaOracleTests(SimpleTestCase):
    """EM-PCA against a direct SVD of the same data"""

    singular_values = [10.0, 7.0, 5.0, 3.0, 2.0, 1.5, 1.0, 0.7, 0.5, 0.3]

    def setUp(self):
        self.x, self.axes = spectrum_matrix(self.singular_values)

    def test_recovers_leading_subspace(self):
        for d in (1, 2, 3):
            result = run_empca(self.x, EmpcaConfig(target_dim=d, max_iters=500, tol=1e-10, seed=d))
            self.assertTrue(result.converged)
            angles = linalg.subspace_angles(result.model.basis.T, self.axes[:, :d])
            self.assertLess(float(np.max(angles)), 1e-6)

    def test_explained_variance_matches_singular_values(self):
        model = fit_empca(self.x, EmpcaConfig(target_dim=3, max_iters=500, tol=1e-10))
        expected = np.square(self.singular_values[:3]) / (self.x.shape[0] - 1)
        np.testing.assert_allclose(model.explained_variance, expected, rtol=1e-6)

    def test_reconstruction_error_is_non_increasing(self):
        result = run_empca(self.x, EmpcaConfig(target_dim=2, max_iters=100, tol=1e-12, seed=3))
        errors = np.array(result.reconstruction_errors)
        slack = 1e-9 * errors[0]
        self.assertTrue(np.all(np.diff(errors) <= slack))
        self.assertEqual(len(errors), result.iterations + 1)

    def test_final_error_equals_energy_outside_the_subspace(self):
        result = run_empca(self.x, EmpcaConfig(target_dim=2, max_iters=500, tol=1e-10))
        expected = float(np.sum(np.square(self.singular_values[2:])))
        self.assertAlmostEqual(result.reconstruction_errors[-1], expected, places=6)
        self.assertAlmostEqual(result.model.reconstruction_error(self.x), expected, places=6)

    def test_random_matrices_match_the_covariance_eigenvectors(self):
        for seed in range(5):
            with self.subTest(seed=seed):
                x = np.random.default_rng(100 + seed).normal(size=(50, 10))
                centred = x - x.mean(axis=0)
                eigenvalues, eigenvectors = linalg.eigh(centred.T @ centred)
                for d in (1, 2, 3):
                    result = run_empca(x, EmpcaConfig(target_dim=d, max_iters=5000, tol=1e-12, seed=seed))

                    angles = linalg.subspace_angles(result.model.basis.T, eigenvectors[:, -d:])
                    self.assertLess(float(np.max(angles)), 1e-6)
                    expected = float(np.sum(eigenvalues[:-d]))
                    self.assertAlmostEqual(result.reconstruction_errors[-1] / expected, 1.0, places=6)

    def test_basis_rows_are_orthonormal(self):
        model = fit_empca(self.x, EmpcaConfig(target_dim=4, max_iters=50))
        np.testing.assert_allclose(model.basis @ model.basis.T, np.eye(4), atol=1e-10)

    def test_projection_geometry_independent_of_seed(self):
        first = pca_project(fit_empca(self.x, EmpcaConfig(2, 500, 1e-10, seed=0)), self.x)
        second = pca_project(fit_empca(self.x, EmpcaConfig(2, 500, 1e-10, seed=17)), self.x)
        np.testing.assert_allclose(first @ first.T, second @ second.T, atol=1e-6)


class EmpcaEdgeCaseTests(SimpleTestCase):

    def test_data_in_an_exact_subspace(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=(50, 2)) @ rng.normal(size=(2, 6)) + rng.normal(size=6)
        result = run_empca(x, EmpcaConfig(target_dim=2, max_iters=200, tol=1e-10))
        self.assertLess(result.reconstruction_errors[-1], 1e-8)

    def test_full_dimension_reconstructs_exactly(self):
        x = np.random.default_rng(6).normal(size=(20, 4))
        model = fit_empca(x, EmpcaConfig(target_dim=4, max_iters=20))
        rebuilt = pca_project(model, x) @ model.basis + model.mean
        np.testing.assert_allclose(rebuilt, x, atol=1e-9)
        self.assertLess(model.reconstruction_error(x), 1e-9)

    def test_rank_deficient_input_still_fits(self):
        rng = np.random.default_rng(7)
        x = np.outer(rng.normal(size=30), rng.normal(size=5))
        result = run_empca(x, EmpcaConfig(target_dim=3, max_iters=30))
        self.assertEqual(result.model.basis.shape, (3, 5))
        self.assertTrue(np.all(np.isfinite(result.model.basis)))
        np.testing.assert_allclose(result.model.basis @ result.model.basis.T, np.eye(3), atol=1e-8)
        self.assertLessEqual(result.reconstruction_errors[-1], result.reconstruction_errors[0] + 1e-9)

    def test_sparse_and_dense_input_agree(self):
        assignments = np.random.default_rng(8).integers(0, 4, size=(25, 6))
        representation = SparseBinaryMatrix.from_assignments(assignments, 4)
        dense = representation.matrix.toarray()
        config = EmpcaConfig(target_dim=3, max_iters=300, tol=1e-10, seed=2)

        sparse_model = fit_empca(representation, config)
        dense_model = fit_empca(dense, config)

        np.testing.assert_allclose(sparse_model.mean, dense_model.mean, atol=1e-12)
        np.testing.assert_allclose(
            pca_project(sparse_model, representation), pca_project(sparse_model, dense), atol=1e-10
        )
        angles = linalg.subspace_angles(sparse_model.basis.T, dense_model.basis.T)
        self.assertLess(float(np.max(angles)), 1e-5)

    def test_too_few_rows(self):
        with self.assertRaises(InsufficientSamplesError):
            run_empca(np.ones((1, 3)), EmpcaConfig(target_dim=1))

    def test_target_dim_larger_than_input(self):
        with self.assertRaises(ArgumentError):
            run_empca(np.ones((5, 3)), EmpcaConfig(target_dim=4))

    def test_invalid_config(self):
        for kwargs in ({'target_dim': 0}, {'target_dim': 2, 'max_iters': 0}, {'target_dim': 2, 'tol': 0.0}):
            with self.assertRaises(ArgumentError):
                EmpcaConfig(**kwargs)


class ProjectionTests(SimpleTestCase):

    def setUp(self):
        self.model = PcaModel(mean=np.array([1.0, 1.0]), basis=np.array([[1.0, 0.0]]))

    def test_projection_subtracts_the_mean(self):
        np.testing.assert_array_equal(pca_project(self.model, [[3.0, 5.0], [1.0, 1.0]]), [[2.0], [0.0]])

    def test_projection_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            pca_project(self.model, np.ones((2, 3)))

    def test_model_shape_checks(self):
        with self.assertRaises(ArgumentError):
            PcaModel(mean=np.zeros(3), basis=np.eye(2))
        with self.assertRaises(ArgumentError):
            PcaModel(mean=np.zeros(1), basis=np.ones((2, 1)))

    def test_subspace_change(self):
        e1 = np.array([[1.0], [0.0]])
        e2 = np.array([[0.0], [1.0]])
        self.assertEqual(subspace_change(e1, e1), 0.0)
        self.assertEqual(subspace_change(e1, -e1), 0.0)
        self.assertAlmostEqual(subspace_change(e1, e2), np.sqrt(2.0))
