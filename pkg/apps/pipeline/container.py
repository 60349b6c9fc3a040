# apps/pipeline/container.py
"""
CMBN model container.

Layout (all integers little endian):

    b"CMBN" | u32 format version | u32 model kind | u32 section count
    then per section:
    4-byte ASCII tag | u64 payload length | u32 CRC-32 of payload | payload

Array payloads are: u8 dtype code (1 = float64, 2 = int64) | u8 ndim |
u64 per dimension | raw little-endian values. The first section is always
META, a UTF-8 JSON document (sorted keys) describing the structure that the
following array sections fill in, in order.
"""

import io
import json
import logging
import struct
import zlib
from pathlib import Path

import numpy as np
from scipy import sparse

from apps.cluster_eval.kmeans import KmeansResult
from apps.core.exceptions import ArgumentError, ChecksumError, ContainerError, KindMismatchError
from apps.dataset.matrices import LabelVector
from apps.empca.subspace import PcaModel
from apps.mbn.network import CentersClustering, MbnConfig, MbnLayer, MbnModel
from apps.mlp.network import MlpConfig, MlpModel

logger = logging.getLogger('compressive_mbn.pipeline')

MAGIC = b'CMBN'
FORMAT_VERSION = 1

KIND_MBN = 'mbn'
KIND_PCA = 'pca'
KIND_MLP = 'mlp'
KIND_KMEANS = 'kmeans'
KIND_CODES = {KIND_MBN: 1, KIND_PCA: 2, KIND_MLP: 3, KIND_KMEANS: 4}
KIND_NAMES = {code: name for name, code in KIND_CODES.items()}

_HEADER = struct.Struct('<4sIII')
_SECTION = struct.Struct('<4sQI')
_DTYPES = {1: np.dtype('<f8'), 2: np.dtype('<i8')}
_DTYPE_CODES = {'f': 1, 'i': 2}


def model_kind(model):
    if isinstance(model, MbnModel):
        return KIND_MBN
    if isinstance(model, PcaModel):
        return KIND_PCA
    if isinstance(model, MlpModel):
        return KIND_MLP
    if isinstance(model, KmeansResult):
        return KIND_KMEANS
    raise ArgumentError(f"Cannot store a {type(model).__name__} in a CMBN container")


def _encode_array(array):
    array = np.asarray(array)
    code = _DTYPE_CODES.get(array.dtype.kind)
    if code is None:
        raise ArgumentError(f"Unsupported array dtype {array.dtype}")
    values = np.ascontiguousarray(array, dtype=_DTYPES[code])
    header = struct.pack(f'<BB{values.ndim}Q', code, values.ndim, *values.shape)
    return header + values.tobytes()


def _decode_array(payload, tag):
    if len(payload) < 2:
        raise ContainerError(f"Section {tag} is too short for an array header")
    code, ndim = struct.unpack_from('<BB', payload)
    dtype = _DTYPES.get(code)
    if dtype is None:
        raise ContainerError(f"Section {tag} has unknown dtype code {code}")
    offset = 2 + 8 * ndim
    if len(payload) < offset:
        raise ContainerError(f"Section {tag} is too short for {ndim} dimensions")
    shape = struct.unpack_from(f'<{ndim}Q', payload, 2)
    count = int(np.prod(shape, dtype=np.int64))
    if len(payload) - offset != count * dtype.itemsize:
        raise ContainerError(f"Section {tag} payload does not match its dimensions {shape}")
    values = np.frombuffer(payload, dtype=dtype, offset=offset, count=count).reshape(shape)
    return values.astype(dtype.newbyteorder('='))


class _Writer:
    def __init__(self):
        self.sections = []

    def meta(self, data):
        text = json.dumps(data, sort_keys=True, separators=(',', ':'))
        self.sections.append((b'META', text.encode('utf-8')))

    def array(self, tag, array):
        self.sections.append((tag, _encode_array(array)))

    def to_bytes(self, kind):
        out = io.BytesIO()
        out.write(_HEADER.pack(MAGIC, FORMAT_VERSION, KIND_CODES[kind], len(self.sections)))
        for tag, payload in self.sections:
            out.write(_SECTION.pack(tag, len(payload), zlib.crc32(payload)))
            out.write(payload)
        return out.getvalue()


class _Reader:
    def __init__(self, sections):
        self.sections = sections
        self.position = 0

    def _next(self, tag):
        if self.position >= len(self.sections):
            raise ContainerError(f"Container ended before section {tag.decode()}")
        found, payload = self.sections[self.position]
        if found != tag:
            raise ContainerError(f"Expected section {tag.decode()}, found {found.decode(errors='replace')}")
        self.position += 1
        return payload

    def meta(self):
        try:
            return json.loads(self._next(b'META').decode('utf-8'))
        except ValueError as exc:
            raise ContainerError(f"META section is not valid JSON: {exc}") from exc

    def array(self, tag):
        return _decode_array(self._next(tag), tag.decode())


def _write_mbn(writer, model):
    writer.meta({
        'config': model.config.to_dict(),
        'layers': [
            {
                'input_dim': layer.input_dim,
                'metric': layer.metric,
                'k': layer.k,
                'clusterings': len(layer.clusterings),
                'sparse': [c.is_sparse for c in layer.clusterings],
            }
            for layer in model.layers
        ],
    })
    for layer in model.layers:
        for clustering in layer.clusterings:
            writer.array(b'SUBS', clustering.feature_subset)
            if clustering.is_sparse:
                centers = clustering.centers
                writer.array(b'CPTR', centers.indptr.astype(np.int64))
                writer.array(b'CIDX', centers.indices.astype(np.int64))
                writer.array(b'CVAL', centers.data)
            else:
                writer.array(b'CTRD', clustering.centers)


def _read_mbn(reader):
    meta = reader.meta()
    layers = []
    for layer_meta in meta['layers']:
        clusterings = []
        for is_sparse in layer_meta['sparse']:
            subset = reader.array(b'SUBS')
            if is_sparse:
                indptr = reader.array(b'CPTR')
                indices = reader.array(b'CIDX')
                data = reader.array(b'CVAL')
                centers = sparse.csr_matrix(
                    (data, indices, indptr), shape=(layer_meta['k'], subset.size)
                )
            else:
                centers = reader.array(b'CTRD')
            clusterings.append(CentersClustering(feature_subset=subset, centers=centers))
        layers.append(MbnLayer(
            clusterings=clusterings,
            input_dim=layer_meta['input_dim'],
            metric=layer_meta['metric'],
        ))
    return MbnModel(layers=layers, config=MbnConfig.from_dict(meta['config']))


def _write_pca(writer, model):
    writer.meta({'d_in': model.d_in, 'd_out': model.d_out})
    writer.array(b'MEAN', model.mean)
    writer.array(b'BASE', model.basis)
    writer.array(b'EVAR', model.explained_variance)


def _read_pca(reader):
    reader.meta()
    return PcaModel(
        mean=reader.array(b'MEAN'),
        basis=reader.array(b'BASE'),
        explained_variance=reader.array(b'EVAR'),
    )


def _write_mlp(writer, model):
    writer.meta({'config': model.config.to_dict()})
    for weight, bias in zip(model.weights, model.biases):
        writer.array(b'WGHT', weight)
        writer.array(b'BIAS', bias)


def _read_mlp(reader):
    config = MlpConfig.from_dict(reader.meta()['config'])
    weights, biases = [], []
    for _ in range(len(config.layer_sizes) - 1):
        weights.append(reader.array(b'WGHT'))
        biases.append(reader.array(b'BIAS'))
    return MlpModel(weights=tuple(weights), biases=tuple(biases), config=config)


def _write_kmeans(writer, result):
    writer.meta({'k': result.k, 'num_classes': result.labels.num_classes, 'inertia': result.inertia})
    writer.array(b'LABL', result.labels.labels)
    writer.array(b'CENT', result.centers)
    writer.array(b'TRCE', np.asarray(result.inertia_trace, dtype=np.float64))
    writer.array(b'RSTI', np.asarray(result.restart_inertias, dtype=np.float64))


def _read_kmeans(reader):
    meta = reader.meta()
    labels = LabelVector(labels=reader.array(b'LABL'), num_classes=meta['num_classes'])
    centers = reader.array(b'CENT')
    centers.setflags(write=False)
    return KmeansResult(
        labels=labels,
        centers=centers,
        inertia=meta['inertia'],
        inertia_trace=reader.array(b'TRCE').tolist(),
        restart_inertias=reader.array(b'RSTI').tolist(),
    )


_WRITERS = {KIND_MBN: _write_mbn, KIND_PCA: _write_pca, KIND_MLP: _write_mlp, KIND_KMEANS: _write_kmeans}
_READERS = {KIND_MBN: _read_mbn, KIND_PCA: _read_pca, KIND_MLP: _read_mlp, KIND_KMEANS: _read_kmeans}


def dumps_model(model):
    kind = model_kind(model)
    writer = _Writer()
    _WRITERS[kind](writer, model)
    return writer.to_bytes(kind)


def _split_sections(payload, count):
    sections = []
    offset = _HEADER.size
    for index in range(count):
        if len(payload) < offset + _SECTION.size:
            raise ChecksumError(f"Container truncated in the header of section {index + 1}/{count}")
        tag, length, checksum = _SECTION.unpack_from(payload, offset)
        offset += _SECTION.size
        body = payload[offset:offset + length]
        if len(body) != length:
            raise ChecksumError(
                f"Container truncated in section {tag.decode(errors='replace')}: "
                f"expected {length} bytes, found {len(body)}"
            )
        if zlib.crc32(body) != checksum:
            raise ChecksumError(f"Checksum mismatch in section {tag.decode(errors='replace')}")
        sections.append((tag, body))
        offset += length
    if offset != len(payload):
        raise ContainerError(f"{len(payload) - offset} trailing bytes after the last section")
    return sections


def loads_model(payload, expected_kind=None):
    if len(payload) < _HEADER.size:
        raise ChecksumError(f"Container truncated: {len(payload)} bytes is shorter than the header")
    magic, version, kind_code, count = _HEADER.unpack_from(payload)
    if magic != MAGIC:
        raise ContainerError(f"Not a CMBN container (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise ContainerError(f"Unsupported CMBN format version {version}, expected {FORMAT_VERSION}")
    kind = KIND_NAMES.get(kind_code)
    if kind is None:
        raise ContainerError(f"Unknown model kind code {kind_code}")
    if expected_kind is not None and kind != expected_kind:
        raise KindMismatchError(expected_kind, kind)

    reader = _Reader(_split_sections(payload, count))
    try:
        model = _READERS[kind](reader)
    except (KeyError, TypeError) as exc:
        raise ContainerError(f"META section does not describe a {kind} model: {exc}") from exc
    except ArgumentError as exc:
        raise ContainerError(f"Stored {kind} model is inconsistent: {exc}") from exc
    if reader.position != len(reader.sections):
        raise ContainerError(f"{len(reader.sections) - reader.position} unread sections in {kind} container")
    return model


def save_model(path, model):
    """Write model to path as a CMBN container"""
    payload = dumps_model(model)
    Path(path).write_bytes(payload)
    logger.info(f"Saved {model_kind(model)} model to {path} ({len(payload)} bytes)")


def load_model(path, expected_kind=None):
    """
    Read a CMBN container. With expected_kind set, a container holding a
    different kind raises KindMismatchError.
    """
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as exc:
        raise ContainerError(f"Cannot read model file {path}: {exc}") from exc
    return loads_model(payload, expected_kind)
