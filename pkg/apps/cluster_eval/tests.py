import itertools
import math
import warnings

import numpy as np
from django.test import SimpleTestCase

from apps.core.exceptions import ArgumentError, DimensionMismatchError, InsufficientSamplesError
from apps.dataset.matrices import LabelVector
from .kmeans import KmeansConfig, assign_nearest_center, compute_inertia, kmeans
from .metrics import contingency_matrix, indicators_to_labels, labels_to_indicators, nmi


def best_partition_cost(x, k):
    """Exhaustive minimum within-cluster sum of squares over every labeling"""
    best = math.inf
    for labels in itertools.product(range(k), repeat=x.shape[0]):
        labels = np.array(labels)
        cost = 0.0
        for cluster in range(k):
            members = x[labels == cluster]
            if members.size:
                cost += float(np.sum((members - members.mean(axis=0)) ** 2))
        best = min(best, cost)
    return best


class KmeansTests(SimpleTestCase):
    """Lloyd k-means with restarts"""

    def test_two_points_two_clusters(self):
        result = kmeans(np.array([[0.0], [10.0]]), KmeansConfig(k=2, n_restarts=3))
        self.assertEqual(sorted(result.centers.ravel().tolist()), [0.0, 10.0])
        self.assertEqual(result.inertia, 0.0)

    def test_two_pairs(self):
        x = np.array([[0.0], [1.0], [10.0], [11.0]])
        result = kmeans(x, KmeansConfig(k=2, n_restarts=10))
        self.assertEqual(result.inertia, 1.0)
        self.assertEqual(sorted(result.centers.ravel().tolist()), [0.5, 10.5])
        self.assertEqual(result.labels.labels[0], result.labels.labels[1])
        self.assertNotEqual(result.labels.labels[1], result.labels.labels[2])

    def test_single_cluster_is_the_mean(self):
        x = np.random.default_rng(0).normal(size=(15, 3))
        result = kmeans(x, KmeansConfig(k=1, n_restarts=2))
        np.testing.assert_allclose(result.centers[0], x.mean(axis=0))
        self.assertAlmostEqual(result.inertia, float(np.sum((x - x.mean(axis=0)) ** 2)))

    def test_inertia_trace_is_non_increasing(self):
        x = np.random.default_rng(1).normal(size=(200, 4))
        result = kmeans(x, KmeansConfig(k=6, n_restarts=4, seed=3))
        trace = np.array(result.inertia_trace)
        self.assertTrue(np.all(np.diff(trace) <= 1e-9 * trace[0]))

    def test_best_restart_is_kept(self):
        x = np.random.default_rng(2).normal(size=(100, 2))
        result = kmeans(x, KmeansConfig(k=5, n_restarts=8, seed=1))
        self.assertEqual(len(result.restart_inertias), 8)
        self.assertLessEqual(result.inertia, min(result.restart_inertias) + 1e-12)
        self.assertAlmostEqual(result.inertia, compute_inertia(x, result.labels.labels, result.centers))

    def test_finds_the_global_optimum_on_small_instances(self):
        rng = np.random.default_rng(10)
        for trial in range(10):
            n = int(rng.integers(5, 9))
            k = int(rng.integers(1, 4))
            x = rng.uniform(-1.0, 1.0, size=(n, 2))
            with self.subTest(trial=trial, n=n, k=k):
                result = kmeans(x, KmeansConfig(k=k, n_restarts=20, seed=trial))
                optimum = best_partition_cost(x, k)
                self.assertLessEqual(result.inertia, optimum * (1 + 1e-9) + 1e-12)
                self.assertGreaterEqual(result.inertia, optimum * (1 - 1e-9) - 1e-12)

    def test_same_seed_same_result_for_any_thread_count(self):
        x = np.random.default_rng(4).normal(size=(80, 3))
        config = KmeansConfig(k=4, n_restarts=6, seed=9)
        self.assertEqual(kmeans(x, config), kmeans(x, config, n_jobs=3))

    def test_duplicate_rows_with_more_clusters_than_values(self):
        x = np.vstack([np.zeros((10, 2)), np.ones((1, 2)) * 50.0])
        result = kmeans(x, KmeansConfig(k=3, n_restarts=5))
        self.assertEqual(result.k, 3)
        self.assertEqual(result.inertia, 0.0)

    def test_duplicate_rows_converge_before_the_iteration_cap(self):
        x = np.vstack([np.zeros((10, 2)), np.ones((1, 2)) * 50.0])
        config = KmeansConfig(k=3, n_restarts=5, max_iters=300)
        with warnings.catch_warnings():
            warnings.simplefilter('error', RuntimeWarning)
            result = kmeans(x, config)
        self.assertLess(len(result.inertia_trace), config.max_iters)
        self.assertTrue(np.all(np.isfinite(result.centers)))

    def test_heavily_repeated_values_keep_every_center_finite(self):
        x = np.random.default_rng(12).integers(0, 3, size=(40, 2)).astype(np.float64)
        config = KmeansConfig(k=8, n_restarts=4, max_iters=300, seed=5)
        with warnings.catch_warnings():
            warnings.simplefilter('error', RuntimeWarning)
            result = kmeans(x, config)
        self.assertLess(len(result.inertia_trace), config.max_iters)
        self.assertTrue(np.all(np.isfinite(result.centers)))
        self.assertAlmostEqual(result.inertia, compute_inertia(x, result.labels.labels, result.centers))

    def test_fewer_rows_than_clusters(self):
        with self.assertRaises(InsufficientSamplesError):
            kmeans(np.zeros((2, 2)), KmeansConfig(k=3))

    def test_invalid_config(self):
        for kwargs in ({'k': 0}, {'k': 2, 'n_restarts': 0}, {'k': 2, 'max_iters': 0}):
            with self.assertRaises(ArgumentError):
                KmeansConfig(**kwargs)


class AssignNearestCenterTests(SimpleTestCase):

    def test_examples_and_ties(self):
        centers = np.array([[0.0, 0.0], [10.0, 10.0]])
        labels = assign_nearest_center(np.array([[1.0, 1.0], [9.0, 8.0], [5.0, 5.0]]), centers)
        self.assertEqual(labels.labels.tolist(), [0, 1, 0])
        self.assertEqual(labels.num_classes, 2)

    def test_empty_input(self):
        labels = assign_nearest_center(np.zeros((0, 2)), np.eye(2))
        self.assertEqual(len(labels), 0)

    def test_dimension_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            assign_nearest_center(np.zeros((2, 3)), np.eye(2))


class IndicatorTests(SimpleTestCase):

    def test_one_hot_rows(self):
        indicators = labels_to_indicators(LabelVector.from_values([2, 0], num_classes=3), 3)
        np.testing.assert_array_equal(indicators, [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])

    def test_argmax_decode(self):
        decoded = indicators_to_labels(np.array([[0.1, 0.7, 0.2], [0.5, 0.5, 0.0]]))
        self.assertEqual(decoded.labels.tolist(), [1, 0])

    def test_decode_inverts_encode(self):
        labels = LabelVector.from_values(np.random.default_rng(0).integers(0, 5, size=50), num_classes=5)
        self.assertEqual(indicators_to_labels(labels_to_indicators(labels, 5)), labels)

    def test_label_out_of_range(self):
        with self.assertRaises(ArgumentError):
            labels_to_indicators([0, 3], 3)


class NmiTests(SimpleTestCase):

    def test_identical_partitions(self):
        self.assertAlmostEqual(nmi([0, 0, 1, 1], [0, 0, 1, 1]), 1.0, places=12)

    def test_independent_partitions(self):
        self.assertAlmostEqual(nmi([0, 0, 1, 1], [0, 1, 0, 1]), 0.0, places=12)

    def test_worked_example(self):
        h_a = -(0.75 * math.log(0.75) + 0.25 * math.log(0.25))
        h_b = math.log(2.0)
        mutual = 0.5 * math.log(4.0 / 3.0) + 0.25 * math.log(2.0 / 3.0) + 0.25 * math.log(2.0)
        value = nmi([0, 0, 0, 1], [0, 0, 1, 1])
        self.assertAlmostEqual(value, mutual / math.sqrt(h_a * h_b), places=12)
        self.assertAlmostEqual(value, 0.3456, places=4)

    def test_constant_labeling_scores_zero(self):
        self.assertEqual(nmi([0, 0, 0], [0, 1, 2]), 0.0)
        self.assertEqual(nmi([1, 1], [1, 1]), 0.0)

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(0)
        a = rng.integers(0, 4, size=60)
        b = rng.integers(0, 5, size=60)
        reference = nmi(a, b)
        for _ in range(100):
            relabel_a = rng.permutation(4)
            relabel_b = rng.permutation(5)
            self.assertAlmostEqual(nmi(relabel_a[a], relabel_b[b]), reference, places=12)

    def test_symmetry_and_range(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            a = rng.integers(0, 3, size=30)
            b = rng.integers(0, 6, size=30)
            self.assertAlmostEqual(nmi(a, b), nmi(b, a), places=12)
            self.assertGreaterEqual(nmi(a, b), 0.0)
            self.assertLessEqual(nmi(a, b), 1.0)

    def test_accepts_label_vectors(self):
        a = LabelVector.from_values([0, 1, 1, 2])
        self.assertAlmostEqual(nmi(a, a), 1.0, places=12)

    def test_length_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            nmi([0, 1], [0, 1, 1])

    def test_empty_labelings(self):
        with self.assertRaises(ArgumentError):
            nmi([], [])

    def test_contingency_counts(self):
        np.testing.assert_array_equal(contingency_matrix([0, 0, 0, 1], [0, 0, 1, 1]), [[2, 1], [0, 1]])
