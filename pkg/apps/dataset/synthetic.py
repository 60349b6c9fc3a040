# apps/dataset/synthetic.py
"""
Gaussian-mixture data for desk-scale runs.

Uses numpy's PCG64 generator, which produces the same stream on every
platform for a given seed.
"""

import numpy as np

from apps.core.exceptions import ArgumentError
from .matrices import LabelVector


def make_synthetic_gaussians(seed, n_per_class, classes, dim, separation):
    """
    Draw n_per_class rows per class from a unit-variance isotropic Gaussian
    centred at separation * e_(c mod dim). Rows are grouped by class.

    Returns:
        (DenseMatrix of shape (n_per_class*classes, dim), LabelVector)
    """
    if classes < 1 or dim < 1 or n_per_class < 1:
        raise ArgumentError(
            f"n_per_class, classes and dim must be at least 1, "
            f"got {n_per_class}, {classes}, {dim}"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    labels = np.repeat(np.arange(classes, dtype=np.int64), n_per_class)

    centers = np.zeros((classes, dim))
    centers[np.arange(classes), np.arange(classes) % dim] = separation

    x = rng.standard_normal((labels.size, dim)) + centers[labels]
    return x, LabelVector(labels=labels, num_classes=classes)
