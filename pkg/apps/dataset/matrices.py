# apps/dataset/matrices.py
"""
Sample containers shared by every stage.

A DenseMatrix is a 2-D float64 numpy array with one sample per row and only
finite entries. A LabelVector pairs an int64 label array with its class count.
"""

from dataclasses import dataclass

import numpy as np

from apps.core.exceptions import ArgumentError, DataError


def as_dense_matrix(values, name='matrix'):
    """
    Validate and convert values to a C-contiguous float64 matrix.

    Raises:
        ArgumentError: values are not two-dimensional
        DataError: values contain NaN or Inf
    """
    matrix = np.ascontiguousarray(values, dtype=np.float64)
    if matrix.ndim != 2:
        raise ArgumentError(f"{name} must be two-dimensional, got {matrix.ndim} dimensions")
    if not np.all(np.isfinite(matrix)):
        raise DataError(f"{name} contains non-finite entries")
    return matrix


@dataclass(frozen=True, eq=False)
class LabelVector:
    """Ground-truth or predicted hard labels"""

    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise ArgumentError("labels must be one-dimensional")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(np.equal(np.mod(labels, 1), 0)):
                raise ArgumentError("labels must be integers")
        labels = labels.astype(np.int64)
        if self.num_classes < 1:
            raise ArgumentError(f"num_classes must be at least 1, got {self.num_classes}")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ArgumentError(
                f"labels must lie in [0, {self.num_classes}), "
                f"found range [{labels.min()}, {labels.max()}]"
            )
        labels.setflags(write=False)
        object.__setattr__(self, 'labels', labels)

    def __len__(self):
        return int(self.labels.size)

    def __eq__(self, other):
        if not isinstance(other, LabelVector):
            return NotImplemented
        return self.num_classes == other.num_classes and np.array_equal(self.labels, other.labels)

    @classmethod
    def from_values(cls, values, num_classes=None):
        """Build a LabelVector inferring num_classes as max label + 1 when omitted"""
        labels = np.asarray(values, dtype=np.int64)
        if num_classes is None:
            num_classes = int(labels.max()) + 1 if labels.size else 1
        return cls(labels=labels, num_classes=num_classes)


def normalize_scale(x, divisor):
    """Divide every entry by divisor (MNIST pixels use 255)."""
    if not divisor > 0:
        raise ArgumentError(f"divisor must be positive, got {divisor}")
    return as_dense_matrix(x) / float(divisor)
