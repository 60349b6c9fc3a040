import struct
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from apps.cluster_eval.kmeans import KmeansConfig, kmeans
from apps.cluster_eval.metrics import nmi
from apps.core.exceptions import (
    ArgumentError,
    CellParseError,
    DataError,
    FormatError,
    LengthMismatchError,
    RaggedRowError,
)
from .csv_io import load_csv, load_labels_csv, save_csv, save_labels_csv
from .idx import IDX_IMAGE_MAGIC, IDX_LABEL_MAGIC, load_idx, load_mnist, save_idx
from .matrices import LabelVector, as_dense_matrix, normalize_scale
from .synthetic import make_synthetic_gaussians


class TempDirMixin:
    def setUp(self):
        super().setUp()
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()
        super().tearDown()

    def write_bytes(self, name, payload):
        path = self.tmp / name
        path.write_bytes(payload)
        return path

    def write_text(self, name, text):
        path = self.tmp / name
        path.write_text(text, encoding='utf-8')
        return path


class IdxLoaderTests(TempDirMixin, SimpleTestCase):
    """Reading and writing MNIST IDX files"""

    def test_hand_crafted_label_file(self):
        payload = struct.pack('>II', IDX_LABEL_MAGIC, 3) + bytes([3, 1, 4])
        self.assertEqual(len(payload), 11)
        labels = load_idx(self.write_bytes('labels.idx', payload))

        self.assertIsInstance(labels, LabelVector)
        self.assertEqual(labels.labels.tolist(), [3, 1, 4])
        self.assertEqual(labels.num_classes, 10)

    def test_empty_image_file(self):
        payload = struct.pack('>IIII', IDX_IMAGE_MAGIC, 0, 28, 28)
        images = load_idx(self.write_bytes('images.idx', payload))

        self.assertEqual(images.shape, (0, 784))

    def test_images_are_flattened_rows(self):
        pixels = bytes(range(8))
        payload = struct.pack('>IIII', IDX_IMAGE_MAGIC, 2, 2, 2) + pixels
        images = load_idx(self.write_bytes('images.idx', payload))

        self.assertEqual(images.dtype, np.float64)
        self.assertEqual(images.tolist(), [[0, 1, 2, 3], [4, 5, 6, 7]])

    def test_zero_magic_is_a_format_error(self):
        payload = struct.pack('>II', 0, 3) + bytes([3, 1, 4])
        with self.assertRaises(FormatError):
            load_idx(self.write_bytes('bad.idx', payload))

    def test_truncated_payload_is_a_length_mismatch(self):
        payload = struct.pack('>IIII', IDX_IMAGE_MAGIC, 2, 2, 2) + bytes(range(7))
        with self.assertRaises(LengthMismatchError):
            load_idx(self.write_bytes('short.idx', payload))

    def test_truncated_header_is_a_length_mismatch(self):
        payload = struct.pack('>II', IDX_IMAGE_MAGIC, 2)
        with self.assertRaises(LengthMismatchError):
            load_idx(self.write_bytes('short.idx', payload))

    def test_label_outside_digit_range_rejected(self):
        payload = struct.pack('>II', IDX_LABEL_MAGIC, 2) + bytes([3, 12])
        with self.assertRaises(FormatError):
            load_idx(self.write_bytes('labels.idx', payload))

    def test_resave_is_byte_identical(self):
        labels_payload = struct.pack('>II', IDX_LABEL_MAGIC, 4) + bytes([9, 0, 2, 7])
        images_payload = struct.pack('>IIII', IDX_IMAGE_MAGIC, 3, 2, 2) + bytes([0, 255, 17, 3] * 3)

        labels_path = self.write_bytes('labels.idx', labels_payload)
        images_path = self.write_bytes('images.idx', images_payload)
        save_idx(self.tmp / 'labels_copy.idx', load_idx(labels_path))
        save_idx(self.tmp / 'images_copy.idx', load_idx(images_path))

        self.assertEqual((self.tmp / 'labels_copy.idx').read_bytes(), labels_payload)
        self.assertEqual((self.tmp / 'images_copy.idx').read_bytes(), images_payload)

    def test_load_mnist_normalizes_and_limits(self):
        images = self.write_bytes(
            'images.idx', struct.pack('>IIII', IDX_IMAGE_MAGIC, 3, 1, 2) + bytes([255, 0, 51, 102, 0, 0])
        )
        labels = self.write_bytes('labels.idx', struct.pack('>II', IDX_LABEL_MAGIC, 3) + bytes([1, 2, 3]))

        x, y = load_mnist(images, labels, limit=2)

        np.testing.assert_allclose(x, [[1.0, 0.0], [0.2, 0.4]])
        self.assertEqual(y.labels.tolist(), [1, 2])

    def test_load_mnist_rejects_label_count_mismatch(self):
        images = self.write_bytes('images.idx', struct.pack('>IIII', IDX_IMAGE_MAGIC, 2, 1, 1) + bytes([1, 2]))
        labels = self.write_bytes('labels.idx', struct.pack('>II', IDX_LABEL_MAGIC, 1) + bytes([1]))
        with self.assertRaises(LengthMismatchError):
            load_mnist(images, labels)


class CsvLoaderTests(TempDirMixin, SimpleTestCase):

    def test_missing_file(self):
        for loader in (load_csv, load_idx):
            with self.subTest(loader=loader.__name__):
                with self.assertRaises(DataError):
                    loader(self.tmp / 'absent')

    def test_two_by_two(self):
        x = load_csv(self.write_text('m.csv', "1,2\n3,4"))
        self.assertEqual(x.tolist(), [[1.0, 2.0], [3.0, 4.0]])

    def test_header_is_skipped(self):
        x = load_csv(self.write_text('m.csv', "a,b\n1,2\n"), has_header=True)
        self.assertEqual(x.tolist(), [[1.0, 2.0]])

    def test_ragged_row_names_the_line(self):
        with self.assertRaises(RaggedRowError) as ctx:
            load_csv(self.write_text('m.csv', "1,2\n3"))
        self.assertEqual(ctx.exception.line_number, 2)
        self.assertIn('line 2', str(ctx.exception))

    def test_non_numeric_cell(self):
        with self.assertRaises(CellParseError) as ctx:
            load_csv(self.write_text('m.csv', "1,x"))
        self.assertEqual(ctx.exception.cell, 'x')

    def test_non_finite_cell(self):
        with self.assertRaises(CellParseError):
            load_csv(self.write_text('m.csv', "1,nan"))

    def test_save_then_load_preserves_values(self):
        x = np.array([[0.1, -2.5e-12], [1.0 / 3.0, 7.0]])
        path = self.tmp / 'm.csv'
        save_csv(path, x)
        np.testing.assert_array_equal(load_csv(path), x)

    def test_labels_column(self):
        labels = LabelVector.from_values([2, 0, 1])
        path = self.tmp / 'labels.csv'
        save_labels_csv(path, labels)
        self.assertEqual(load_labels_csv(path), labels)

    def test_labels_must_be_one_column(self):
        with self.assertRaises(DataError):
            load_labels_csv(self.write_text('labels.csv', "0,1\n1,0\n"))

    def test_fractional_label_names_the_line(self):
        with self.assertRaises(CellParseError) as ctx:
            load_labels_csv(self.write_text('labels.csv', "0\n1\n2.7\n"))
        self.assertEqual(ctx.exception.line_number, 3)
        self.assertEqual(ctx.exception.cell, '2.7')

    def test_negative_label_is_a_data_error(self):
        with self.assertRaises(DataError) as ctx:
            load_labels_csv(self.write_text('labels.csv', "0\n-1\n"))
        self.assertNotIsInstance(ctx.exception, ArgumentError)
        self.assertIn('line 2', str(ctx.exception))

    def test_label_beyond_the_class_count(self):
        with self.assertRaises(DataError):
            load_labels_csv(self.write_text('labels.csv', "0\n3\n"), num_classes=3)

    def test_integral_floats_are_accepted(self):
        labels = load_labels_csv(self.write_text('labels.csv', "label\n1.0\n0\n"), has_header=True)
        self.assertEqual(labels.labels.tolist(), [1, 0])
        self.assertEqual(labels.num_classes, 2)


class MatrixTests(SimpleTestCase):

    def test_normalize_examples(self):
        x = normalize_scale(np.array([[255.0, 0.0, 51.0]]), 255)
        self.assertEqual(x[0, 0], 1.0)
        self.assertEqual(x[0, 1], 0.0)
        self.assertEqual(x[0, 2], 0.2)

    def test_normalize_rejects_non_positive_divisor(self):
        for divisor in (0, -1.0):
            with self.assertRaises(ArgumentError):
                normalize_scale(np.ones((2, 2)), divisor)

    def test_normalize_is_linear(self):
        rng = np.random.default_rng(3)
        x = rng.random((5, 4)) * 255
        for a in (0.5, 3.0, 255.0):
            np.testing.assert_allclose(normalize_scale(a * x, a * 7.0), normalize_scale(x, 7.0), rtol=1e-14)

    def test_dense_matrix_rejects_non_finite(self):
        with self.assertRaises(DataError):
            as_dense_matrix([[1.0, np.inf]])

    def test_dense_matrix_rejects_vectors(self):
        with self.assertRaises(ArgumentError):
            as_dense_matrix([1.0, 2.0])

    def test_label_vector_range(self):
        with self.assertRaises(ArgumentError):
            LabelVector(labels=np.array([0, 3]), num_classes=3)
        with self.assertRaises(ArgumentError):
            LabelVector(labels=np.array([-1, 0]), num_classes=3)

    def test_label_vector_is_read_only(self):
        labels = LabelVector.from_values([0, 1])
        with self.assertRaises(ValueError):
            labels.labels[0] = 1


class SyntheticGaussianTests(SimpleTestCase):

    def test_same_seed_same_data(self):
        x1, y1 = make_synthetic_gaussians(7, 20, 3, 5, 4.0)
        x2, y2 = make_synthetic_gaussians(7, 20, 3, 5, 4.0)
        np.testing.assert_array_equal(x1, x2)
        self.assertEqual(y1, y2)

    def test_shape_and_label_pattern_independent_of_seed(self):
        for seed in (0, 1, 99):
            x, y = make_synthetic_gaussians(seed, 4, 3, 6, 10.0)
            self.assertEqual(x.shape, (12, 6))
            self.assertEqual(y.labels.tolist(), [0] * 4 + [1] * 4 + [2] * 4)

    def test_one_row_per_class(self):
        x, y = make_synthetic_gaussians(0, 1, 3, 2, 1.0)
        self.assertEqual(x.shape, (3, 2))
        self.assertEqual(y.labels.tolist(), [0, 1, 2])

    def test_class_means_wrap_over_dimensions(self):
        x, y = make_synthetic_gaussians(1, 2000, 3, 2, 10.0)
        means = np.array([x[y.labels == c].mean(axis=0) for c in range(3)])
        np.testing.assert_allclose(means, [[10, 0], [0, 10], [10, 0]], atol=0.15)

    def test_invalid_counts(self):
        with self.assertRaises(ArgumentError):
            make_synthetic_gaussians(0, 5, 0, 2, 1.0)
        with self.assertRaises(ArgumentError):
            make_synthetic_gaussians(0, 5, 2, 0, 1.0)

    def test_zero_separation_carries_no_cluster_structure(self):
        x, y = make_synthetic_gaussians(11, 200, 3, 10, 0.0)
        result = kmeans(x, KmeansConfig(k=3, n_restarts=3, seed=0))
        self.assertLess(nmi(y, result.labels), 0.1)
