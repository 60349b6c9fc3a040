import struct
import tempfile
import zlib
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from apps.cluster_eval.kmeans import KmeansConfig, kmeans
from apps.core.exceptions import ArgumentError, ChecksumError, ContainerError, KindMismatchError
from apps.empca.subspace import EmpcaConfig, fit_empca
from apps.mbn.network import MbnConfig, mbn_transform, train_mbn
from apps.mlp.network import SIGMOID, MlpConfig, train_mlp
from .container import (
    KIND_KMEANS,
    KIND_MBN,
    KIND_MLP,
    KIND_PCA,
    dumps_model,
    load_model,
    loads_model,
    model_kind,
    save_model,
)


class ContainerTestMixin:

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        rng = np.random.default_rng(0)
        cls.x = rng.normal(size=(30, 6))
        # r > 0 puts re-sampled entries into the sparse upper-layer centers
        cls.mbn = train_mbn(cls.x, MbnConfig((8, 4), 5, 0.5, 0.5, seed=1))
        representation = mbn_transform(cls.mbn, cls.x)
        cls.pca = fit_empca(representation, EmpcaConfig(target_dim=3, max_iters=20))
        cls.kmeans = kmeans(cls.x, KmeansConfig(k=3, n_restarts=2))
        cls.mlp, _ = train_mlp(cls.x, rng.random((30, 3)), MlpConfig((6, 5, 3), SIGMOID, epochs=2))
        cls.models = {KIND_MBN: cls.mbn, KIND_PCA: cls.pca, KIND_KMEANS: cls.kmeans, KIND_MLP: cls.mlp}


class ContainerRoundTripTests(ContainerTestMixin, SimpleTestCase):
    """save -> load -> save"""

    def test_upper_layer_centers_are_sparse(self):
        self.assertTrue(all(c.is_sparse for c in self.mbn.layers[1].clusterings))
        self.assertFalse(any(c.is_sparse for c in self.mbn.layers[0].clusterings))

    def test_resaving_is_byte_identical(self):
        for kind, model in self.models.items():
            with self.subTest(kind=kind):
                payload = dumps_model(model)
                restored = loads_model(payload, expected_kind=kind)
                self.assertEqual(model_kind(restored), kind)
                self.assertEqual(dumps_model(restored), payload)

    def test_restored_models_are_equal(self):
        for kind, model in self.models.items():
            with self.subTest(kind=kind):
                self.assertEqual(loads_model(dumps_model(model)), model)

    def test_restored_mbn_transforms_identically(self):
        restored = loads_model(dumps_model(self.mbn))
        self.assertEqual(mbn_transform(restored, self.x), mbn_transform(self.mbn, self.x))

    def test_files_on_disk(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'mlp.cmbn'
            with self.assertLogs('compressive_mbn.pipeline', level='INFO'):
                save_model(path, self.mlp)
            self.assertEqual(load_model(path, KIND_MLP), self.mlp)
            self.assertEqual(path.read_bytes()[:4], b'CMBN')

    def test_unsupported_model(self):
        with self.assertRaises(ArgumentError):
            dumps_model(np.zeros(3))


class ContainerRejectionTests(ContainerTestMixin, SimpleTestCase):

    def setUp(self):
        self.payload = dumps_model(self.pca)

    def test_truncated_file(self):
        for cut in (len(self.payload) - 1, len(self.payload) // 2, 20, 10):
            with self.subTest(cut=cut):
                with self.assertRaises(ChecksumError):
                    loads_model(self.payload[:cut])

    def test_flipped_payload_byte(self):
        corrupted = bytearray(self.payload)
        corrupted[-3] ^= 0xFF
        with self.assertRaises(ChecksumError):
            loads_model(bytes(corrupted))

    def test_kind_mismatch_names_both_kinds(self):
        with self.assertRaises(KindMismatchError) as ctx:
            loads_model(self.payload, expected_kind=KIND_MLP)
        self.assertEqual((ctx.exception.expected, ctx.exception.found), (KIND_MLP, KIND_PCA))
        self.assertIn('mlp', str(ctx.exception))
        self.assertIn('pca', str(ctx.exception))

    def test_bad_magic(self):
        with self.assertRaises(ContainerError):
            loads_model(b'XMBN' + self.payload[4:])

    def test_unsupported_version(self):
        with self.assertRaises(ContainerError):
            loads_model(self.payload[:4] + struct.pack('<I', 2) + self.payload[8:])

    def test_trailing_bytes(self):
        with self.assertRaises(ContainerError):
            loads_model(self.payload + b'\x00')

    def test_inconsistent_sections(self):
        # A well-checksummed container whose BASE does not match MEAN
        header = struct.pack('<4sIII', b'CMBN', 1, 2, 4)
        sections = [
            (b'META', b'{}'),
            (b'MEAN', struct.pack('<BBQ', 1, 1, 2) + np.zeros(2).tobytes()),
            (b'BASE', struct.pack('<BBQQ', 1, 2, 1, 3) + np.zeros(3).tobytes()),
            (b'EVAR', struct.pack('<BBQ', 1, 1, 1) + np.zeros(1).tobytes()),
        ]
        payload = header + b''.join(
            struct.pack('<4sQI', tag, len(body), zlib.crc32(body)) + body for tag, body in sections
        )
        with self.assertRaises(ContainerError):
            loads_model(payload)

    def test_missing_file(self):
        with self.assertRaises(ContainerError):
            load_model('/nonexistent/model.cmbn')
