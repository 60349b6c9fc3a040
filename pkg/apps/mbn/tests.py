import numpy as np
from django.conf import settings
from django.test import SimpleTestCase

from apps.core.exceptions import ArgumentError, DimensionMismatchError, InsufficientSamplesError
from apps.dataset.synthetic import make_synthetic_gaussians
from .network import (
    DOT_PRODUCT,
    EUCLIDEAN,
    CentersClustering,
    MbnConfig,
    encode_clustering,
    encode_rows,
    mbn_transform,
    sample_clustering,
    train_mbn,
    train_mbn_with_output,
)
from .sparse import SparseBinaryMatrix


def reference_transform(model, x):
    """Row-by-row dense forward pass, written without vectorization"""
    current = np.asarray(x, dtype=np.float64)
    for layer in model.layers:
        output = np.zeros((current.shape[0], layer.output_dim))
        for v, clustering in enumerate(layer.clusterings):
            centers = clustering.centers
            if not isinstance(centers, np.ndarray):
                centers = centers.toarray()
            for i, row in enumerate(current):
                observed = row[clustering.feature_subset]
                best, best_score = 0, None
                for j, center in enumerate(centers):
                    if layer.metric == EUCLIDEAN:
                        score = -float(np.sum((observed - center) ** 2))
                    else:
                        score = float(np.dot(observed, center))
                    if best_score is None or score > best_score:
                        best, best_score = j, score
                output[i, v * layer.k + best] = 1.0
        current = output
    return current


class SampleClusteringTests(SimpleTestCase):
    """Bootstrap sampling of a single k-centers clustering"""

    def setUp(self):
        self.x = np.random.default_rng(0).normal(size=(30, 8))

    def test_subset_size_and_order(self):
        for a, expected in ((0.5, 4), (0.3, 3), (1.0, 8), (0.01, 1)):
            clustering = sample_clustering(self.x, 5, a, 0.0, np.random.default_rng(1))
            self.assertEqual(clustering.feature_subset.size, expected)
            self.assertTrue(np.all(np.diff(clustering.feature_subset) > 0))

    def test_fractional_subset_size_rounds_up(self):
        x = np.random.default_rng(5).normal(size=(12, 784))
        for a, expected in ((0.5, 392), (0.26, 204), (0.001, 1)):
            clustering = sample_clustering(x, 3, a, 0.0, np.random.default_rng(0))
            self.assertEqual(clustering.feature_subset.size, expected)

    def test_centers_are_distinct_input_rows_without_reconstruction(self):
        clustering = sample_clustering(self.x, 6, 0.5, 0.0, np.random.default_rng(2))
        observed = self.x[:, clustering.feature_subset]
        matches = [np.flatnonzero(np.all(observed == center, axis=1)) for center in clustering.centers]
        self.assertTrue(all(m.size == 1 for m in matches))
        self.assertEqual(len({int(m[0]) for m in matches}), 6)

    def test_full_reconstruction_draws_every_entry_from_the_same_feature(self):
        clustering = sample_clustering(self.x, 5, 0.5, 1.0, np.random.default_rng(3))
        for center in clustering.centers:
            for j, feature in enumerate(clustering.feature_subset):
                self.assertIn(center[j], self.x[:, feature])

    def test_k_equal_to_rows_uses_every_row(self):
        x = np.arange(12, dtype=np.float64).reshape(4, 3)
        clustering = sample_clustering(x, 4, 1.0, 0.0, np.random.default_rng(0))
        self.assertEqual(sorted(clustering.centers[:, 0].tolist()), [0.0, 3.0, 6.0, 9.0])

    def test_too_few_rows(self):
        with self.assertRaises(InsufficientSamplesError):
            sample_clustering(self.x[:3], 4, 0.5, 0.0, np.random.default_rng(0))

    def test_invalid_parameters(self):
        rng = np.random.default_rng(0)
        with self.assertRaises(ArgumentError):
            sample_clustering(self.x, 1, 0.5, 0.0, rng)
        with self.assertRaises(ArgumentError):
            sample_clustering(self.x, 4, 0.0, 0.0, rng)
        with self.assertRaises(ArgumentError):
            sample_clustering(self.x, 4, 0.5, 1.5, rng)

    def test_sparse_input_gives_sparse_centers(self):
        sparse_x = SparseBinaryMatrix.from_assignments(np.array([[0, 1], [1, 0], [1, 1], [0, 0]]), 2)
        clustering = sample_clustering(sparse_x, 3, 1.0, 0.5, np.random.default_rng(4))
        self.assertTrue(clustering.is_sparse)
        self.assertEqual(clustering.centers.shape, (3, 4))
        self.assertTrue(set(clustering.centers.data.tolist()) <= {1.0})


class EncodeTests(SimpleTestCase):

    def setUp(self):
        self.clustering = CentersClustering(
            feature_subset=np.array([0]), centers=np.array([[0.0], [1.0]])
        )

    def test_nearest_center_examples(self):
        self.assertEqual(encode_clustering([0.1], self.clustering, EUCLIDEAN), 0)
        self.assertEqual(encode_clustering([0.2], self.clustering, EUCLIDEAN), 0)
        self.assertEqual(encode_clustering([0.9], self.clustering, EUCLIDEAN), 1)

    def test_exact_match_selects_that_center(self):
        self.assertEqual(encode_clustering([1.0], self.clustering, EUCLIDEAN), 1)

    def test_tie_goes_to_lowest_index(self):
        self.assertEqual(encode_clustering([0.5], self.clustering, EUCLIDEAN), 0)

    def test_only_selected_features_are_compared(self):
        clustering = CentersClustering(feature_subset=np.array([1]), centers=np.array([[0.0], [1.0]]))
        self.assertEqual(encode_clustering([100.0, 0.9], clustering, EUCLIDEAN), 1)

    def test_dot_product_prefers_most_shared_units(self):
        clustering = CentersClustering(
            feature_subset=np.array([0, 1, 2]),
            centers=np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]]),
        )
        self.assertEqual(encode_clustering([0.0, 1.0, 1.0], clustering, DOT_PRODUCT), 1)
        self.assertEqual(encode_clustering([0.0, 0.0, 0.0], clustering, DOT_PRODUCT), 0)

    def test_input_narrower_than_subset(self):
        clustering = CentersClustering(feature_subset=np.array([3]), centers=np.array([[0.0], [1.0]]))
        with self.assertRaises(DimensionMismatchError):
            encode_rows(np.zeros((2, 2)), clustering, EUCLIDEAN)


class MbnShapeTests(SimpleTestCase):

    def test_small_network_output_width(self):
        x = np.random.default_rng(0).normal(size=(4, 3))
        representation = mbn_transform(train_mbn(x, MbnConfig((2,), 3)), x)
        self.assertEqual(representation.shape, (4, 6))
        self.assertTrue(np.all(representation.active_counts() == 3))

    def test_full_preset_dimensions(self):
        config = MbnConfig(**settings.COMPRESSIVE_MBN['FULL']['mbn'])
        self.assertEqual(len(config.k_schedule), 9)
        self.assertEqual(config.k_schedule[-1] * config.clusterings_per_layer, 6000)

    def test_random_configurations_keep_layer_invariants(self):
        rng = np.random.default_rng(42)
        for trial in range(20):
            n = int(rng.integers(10, 40))
            d = int(rng.integers(1, 12))
            depth = int(rng.integers(1, 4))
            ks = sorted(rng.integers(2, n + 1, size=depth).tolist(), reverse=True)
            config = MbnConfig(
                k_schedule=ks,
                clusterings_per_layer=int(rng.integers(1, 8)),
                feature_fraction=float(rng.uniform(0.05, 1.0)),
                reconstruction_rate=float(rng.choice([0.0, 0.5])),
                seed=trial,
            )
            x = rng.normal(size=(n, d))
            model, trained_output = train_mbn_with_output(x, config)

            self.assertEqual(len(model.layers), depth)
            for layer, k in zip(model.layers, ks):
                self.assertEqual(layer.k, k)
                self.assertEqual(len(layer.clusterings), config.clusterings_per_layer)
            for output, layer in zip(model.layer_outputs(x), model.layers):
                self.assertEqual(output.shape, (n, layer.output_dim))
                self.assertTrue(np.all(output.active_counts() == config.clusterings_per_layer))
                for row in range(n):
                    active = output.active(row)
                    self.assertTrue(np.all(np.diff(active) > 0))
                    self.assertEqual((active // layer.k).tolist(), list(range(config.clusterings_per_layer)))
            self.assertEqual(trained_output, mbn_transform(model, x))

    def test_empty_input_maps_to_empty_representation(self):
        x = np.random.default_rng(0).normal(size=(6, 3))
        model = train_mbn(x, MbnConfig((3, 2), 4))
        self.assertEqual(mbn_transform(model, np.zeros((0, 3))).shape, (0, 8))


class MbnTrainingTests(SimpleTestCase):

    def setUp(self):
        self.x = np.random.default_rng(7).normal(size=(40, 6))
        self.config = MbnConfig((12, 6, 3), 10, seed=5)

    def test_same_seed_same_model(self):
        self.assertEqual(train_mbn(self.x, self.config), train_mbn(self.x, self.config))

    def test_thread_count_does_not_change_the_model(self):
        serial = train_mbn(self.x, self.config, n_jobs=1)
        threaded = train_mbn(self.x, self.config, n_jobs=4)
        self.assertEqual(serial, threaded)
        self.assertEqual(mbn_transform(serial, self.x), mbn_transform(threaded, self.x, n_jobs=3))

    def test_different_seed_different_model(self):
        other = MbnConfig((12, 6, 3), 10, seed=6)
        self.assertNotEqual(train_mbn(self.x, self.config), train_mbn(self.x, other))

    def test_matches_straight_line_forward_pass(self):
        model = train_mbn(self.x, self.config)
        expected = reference_transform(model, self.x)
        np.testing.assert_array_equal(mbn_transform(model, self.x).matrix.toarray(), expected)

    def test_training_rows_hit_their_own_center(self):
        x = np.random.default_rng(1).normal(size=(8, 4))
        model = train_mbn(x, MbnConfig((8,), 5, feature_fraction=1.0))
        representation = mbn_transform(model, x)
        for v, clustering in enumerate(model.layers[0].clusterings):
            for i in range(8):
                j = int(np.flatnonzero(np.all(clustering.centers == x[i], axis=1))[0])
                self.assertIn(v * 8 + j, representation.active(i))

    def test_duplicated_rows_share_every_unit(self):
        x = np.vstack([self.x, self.x[:5]])
        model = train_mbn(x, self.config)
        representation = mbn_transform(model, x)
        for i in range(5):
            np.testing.assert_array_equal(representation.active(i), representation.active(40 + i))

    def test_row_order_of_transform_input_is_irrelevant(self):
        model = train_mbn(self.x, self.config)
        permutation = np.random.default_rng(3).permutation(40)
        original = mbn_transform(model, self.x)
        shuffled = mbn_transform(model, self.x[permutation])
        self.assertEqual(shuffled, original.take_rows(permutation))

    def test_same_class_rows_overlap_more(self):
        x, y = make_synthetic_gaussians(0, 30, 2, 5, 10.0)
        model = train_mbn(x, MbnConfig((20, 10), 20, seed=1))
        overlap = mbn_transform(model, x).overlap()
        same = y.labels[:, None] == y.labels[None, :]
        off_diagonal = ~np.eye(len(y), dtype=bool)
        self.assertGreater(overlap[same & off_diagonal].mean(), overlap[~same].mean())

    def test_transform_dimension_mismatch(self):
        model = train_mbn(self.x, self.config)
        with self.assertRaises(DimensionMismatchError):
            mbn_transform(model, np.zeros((2, 5)))

    def test_insufficient_rows_names_the_layer(self):
        with self.assertRaises(InsufficientSamplesError) as ctx:
            train_mbn(self.x[:10], MbnConfig((12, 6), 3))
        self.assertIn('layer 1', str(ctx.exception))


class MbnConfigTests(SimpleTestCase):

    def test_rejects_invalid_schedules(self):
        for schedule in ((), (1,), (4, 8)):
            with self.assertRaises(ArgumentError):
                MbnConfig(schedule, 3)

    def test_rejects_invalid_rates(self):
        with self.assertRaises(ArgumentError):
            MbnConfig((4,), 3, feature_fraction=0.0)
        with self.assertRaises(ArgumentError):
            MbnConfig((4,), 3, reconstruction_rate=-0.1)
        with self.assertRaises(ArgumentError):
            MbnConfig((4,), 0)

    def test_dict_round_trip(self):
        config = MbnConfig((8, 4), 5, 0.25, 0.5, seed=9)
        self.assertEqual(MbnConfig.from_dict(config.to_dict()), config)


class SparseBinaryMatrixTests(SimpleTestCase):

    def test_assignments_layout(self):
        matrix = SparseBinaryMatrix.from_assignments(np.array([[1, 0, 2]]), 3)
        self.assertEqual(matrix.shape, (1, 9))
        self.assertEqual(matrix.active(0).tolist(), [1, 3, 8])

    def test_overlap_counts_shared_units(self):
        matrix = SparseBinaryMatrix.from_assignments(np.array([[0, 1], [0, 0], [1, 0]]), 2)
        np.testing.assert_array_equal(matrix.overlap(), [[2, 1, 0], [1, 2, 1], [0, 1, 2]])

    def test_rejects_non_binary_entries(self):
        with self.assertRaises(ArgumentError):
            SparseBinaryMatrix(np.array([[0.0, 2.0]]))
