# apps/mbn/sparse.py
"""
Sparse binary representations produced by MBN layers.

Rows are stored as CSR active-column lists and are never densified between
layers: the top-layer width V*k is large at full scale.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from apps.core.exceptions import ArgumentError


@dataclass(frozen=True, eq=False)
class SparseBinaryMatrix:
    """Binary matrix stored as per-row strictly increasing active-column indices"""

    matrix: sparse.csr_matrix

    def __post_init__(self):
        matrix = sparse.csr_matrix(self.matrix, dtype=np.float64)
        matrix.sum_duplicates()
        matrix.sort_indices()
        if matrix.nnz and not np.all(matrix.data == 1.0):
            raise ArgumentError("SparseBinaryMatrix entries must all be 1")
        object.__setattr__(self, 'matrix', matrix)

    @classmethod
    def from_assignments(cls, assignments, k):
        """
        Build a layer output from an (n, V) array of per-clustering winners.
        Clustering v owns columns [v*k, (v+1)*k).
        """
        assignments = np.asarray(assignments, dtype=np.int64)
        n, v = assignments.shape
        indices = (assignments + np.arange(v, dtype=np.int64) * k).ravel()
        indptr = np.arange(0, n * v + 1, v, dtype=np.int64)
        data = np.ones(indices.size, dtype=np.float64)
        return cls(sparse.csr_matrix((data, indices, indptr), shape=(n, v * k)))

    @property
    def rows(self):
        return self.matrix.shape[0]

    @property
    def cols(self):
        return self.matrix.shape[1]

    @property
    def shape(self):
        return self.matrix.shape

    def active(self, row):
        """Active column indices of one row, strictly increasing"""
        start, stop = self.matrix.indptr[row], self.matrix.indptr[row + 1]
        return self.matrix.indices[start:stop]

    def active_counts(self):
        return np.diff(self.matrix.indptr)

    def take_rows(self, rows):
        return SparseBinaryMatrix(self.matrix[rows])

    def overlap(self, other_row_matrix=None):
        """Pairwise shared-active-unit counts (n x n dense) with itself or another matrix"""
        other = self.matrix if other_row_matrix is None else other_row_matrix.matrix
        return (self.matrix @ other.T).toarray()

    def __eq__(self, other):
        if not isinstance(other, SparseBinaryMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.matrix.indptr, other.matrix.indptr)
            and np.array_equal(self.matrix.indices, other.matrix.indices)
        )
