# apps/dataset/idx.py
"""
Reader and writer for the MNIST IDX layout.

Data format (big endian):
    u8 u8 | zero, zero
    u8    | element type (0x08 = unsigned byte)
    u8    | number of dimensions
    i32[] | size of each dimension
    u8[]  | payload, row-major
"""

import logging
import struct
from pathlib import Path

import numpy as np

from apps.core.exceptions import ArgumentError, DataError, FormatError, LengthMismatchError
from .matrices import LabelVector, as_dense_matrix, normalize_scale

logger = logging.getLogger('compressive_mbn.dataset')

IDX_LABEL_MAGIC = 0x00000801
IDX_IMAGE_MAGIC = 0x00000803
MNIST_NUM_CLASSES = 10


def _read_header(payload, path):
    if len(payload) < 4:
        raise LengthMismatchError(f"{path}: file too short for an IDX magic number")
    magic, = struct.unpack('>I', payload[:4])
    if magic not in (IDX_LABEL_MAGIC, IDX_IMAGE_MAGIC):
        raise FormatError(f"{path}: unsupported IDX magic number 0x{magic:08x}")
    ndim = magic & 0xFF
    header_size = 4 + 4 * ndim
    if len(payload) < header_size:
        raise LengthMismatchError(f"{path}: header declares {ndim} dimensions but the file ends early")
    dims = struct.unpack(f'>{ndim}I', payload[4:header_size])
    return magic, dims, header_size


def load_idx(path):
    """
    Load an IDX label file as a LabelVector or an IDX image file as a
    DenseMatrix with one flattened image (values 0-255) per row.
    """
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as exc:
        raise DataError(f"Cannot read IDX file {path}: {exc}") from exc
    magic, dims, header_size = _read_header(payload, path)

    expected = int(np.prod(dims, dtype=np.int64))
    body = payload[header_size:]
    if len(body) != expected:
        raise LengthMismatchError(
            f"{path}: header declares {expected} payload bytes, found {len(body)}"
        )
    values = np.frombuffer(body, dtype=np.uint8)

    if magic == IDX_LABEL_MAGIC:
        if values.size and values.max() >= MNIST_NUM_CLASSES:
            raise FormatError(f"{path}: label {values.max()} outside 0-{MNIST_NUM_CLASSES - 1}")
        logger.debug(f"Loaded {values.size} labels from {path}")
        return LabelVector(labels=values.astype(np.int64), num_classes=MNIST_NUM_CLASSES)

    count, rows, cols = dims
    logger.debug(f"Loaded {count} images of {rows}x{cols} from {path}")
    return values.reshape(count, rows * cols).astype(np.float64)


def save_idx(path, data, image_shape=None):
    """
    Write a LabelVector or a DenseMatrix of integer pixel values (0-255) in IDX
    layout. image_shape defaults to the square root layout of the row width.
    """
    path = Path(path)
    if isinstance(data, LabelVector):
        if len(data) and data.labels.max() > 255:
            raise ArgumentError("IDX labels are single bytes")
        header = struct.pack('>II', IDX_LABEL_MAGIC, len(data))
        path.write_bytes(header + data.labels.astype(np.uint8).tobytes())
        return

    matrix = as_dense_matrix(data, 'images')
    if image_shape is None:
        side = int(round(np.sqrt(matrix.shape[1])))
        if side * side != matrix.shape[1]:
            raise ArgumentError(f"Cannot infer a square image shape for width {matrix.shape[1]}")
        image_shape = (side, side)
    rows, cols = image_shape
    if rows * cols != matrix.shape[1]:
        raise ArgumentError(f"image_shape {image_shape} does not match row width {matrix.shape[1]}")
    if matrix.size and (matrix.min() < 0 or matrix.max() > 255 or np.any(matrix != np.floor(matrix))):
        raise ArgumentError("IDX images hold integer pixel values in 0-255")

    header = struct.pack('>IIII', IDX_IMAGE_MAGIC, matrix.shape[0], rows, cols)
    path.write_bytes(header + matrix.astype(np.uint8).tobytes())


def load_mnist(images_path, labels_path=None, limit=None, divisor=255.0):
    """
    Load MNIST images normalized by `divisor`, optionally with labels and
    truncated to the first `limit` rows.
    """
    images = load_idx(images_path)
    if isinstance(images, LabelVector):
        raise FormatError(f"{images_path}: expected an image file, found labels")
    labels = None
    if labels_path is not None:
        labels = load_idx(labels_path)
        if not isinstance(labels, LabelVector):
            raise FormatError(f"{labels_path}: expected a label file, found images")
        if len(labels) != images.shape[0]:
            raise LengthMismatchError(
                f"{labels_path}: {len(labels)} labels for {images.shape[0]} images"
            )
    if limit is not None:
        images = images[:limit]
        if labels is not None:
            labels = LabelVector(labels=labels.labels[:limit], num_classes=labels.num_classes)
    return normalize_scale(images, divisor), labels
