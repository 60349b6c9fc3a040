# apps/cluster_eval/metrics.py
"""
Indicator-vector encoding and normalized mutual information.
"""

import numpy as np
from scipy import sparse

from apps.core.exceptions import ArgumentError, DimensionMismatchError
from apps.dataset.matrices import LabelVector, as_dense_matrix


def labels_to_indicators(labels, k):
    """One-hot rows: row i has 1.0 at column labels[i]"""
    values = labels.labels if isinstance(labels, LabelVector) else np.asarray(labels, dtype=np.int64)
    if values.size and (values.min() < 0 or values.max() >= k):
        raise ArgumentError(f"labels must lie in [0, {k}), found range [{values.min()}, {values.max()}]")
    indicators = np.zeros((values.size, k), dtype=np.float64)
    indicators[np.arange(values.size), values] = 1.0
    return indicators


def indicators_to_labels(outputs):
    """Row argmax decode of indicator-like outputs; ties go to the lowest column"""
    outputs = as_dense_matrix(outputs, 'indicator outputs')
    return LabelVector(labels=outputs.argmax(axis=1), num_classes=outputs.shape[1])


def contingency_matrix(a, b):
    """Joint counts of two labelings as a dense array (relabelled to 0..c-1)"""
    classes_a, index_a = np.unique(a, return_inverse=True)
    classes_b, index_b = np.unique(b, return_inverse=True)
    counts = sparse.coo_matrix(
        (np.ones(index_a.size), (index_a, index_b)),
        shape=(classes_a.size, classes_b.size),
    )
    return counts.toarray()


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(a, b):
    """
    Normalized mutual information I(a;b) / sqrt(H(a) H(b)) in natural log.
    Defined as 0 when either labeling is constant.
    """
    values_a = a.labels if isinstance(a, LabelVector) else np.asarray(a)
    values_b = b.labels if isinstance(b, LabelVector) else np.asarray(b)
    if values_a.size != values_b.size:
        raise DimensionMismatchError('NMI labelings', values_a.size, values_b.size)
    if values_a.size == 0:
        raise ArgumentError("NMI needs at least one label")

    n = float(values_a.size)
    joint = contingency_matrix(values_a, values_b)
    row_sums = joint.sum(axis=1)
    col_sums = joint.sum(axis=0)
    h_a = _entropy(row_sums, n)
    h_b = _entropy(col_sums, n)
    denominator = np.sqrt(h_a * h_b)
    if denominator == 0.0:
        return 0.0

    rows, cols = np.nonzero(joint)
    p_joint = joint[rows, cols] / n
    mutual = float((p_joint * np.log(p_joint * n * n / (row_sums[rows] * col_sums[cols]))).sum())
    return float(np.clip(mutual / denominator, 0.0, 1.0))
