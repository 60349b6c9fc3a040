# apps/empca/subspace.py
"""
Expectation-maximization PCA.

Fits a d-dimensional principal subspace by alternating least squares instead
of an eigendecomposition of the D x D covariance:

    E-step: Z = X_c C (C^T C)^-1         latent coordinates
    M-step: C = X_c^T Z (Z^T Z)^-1       basis regressed on the coordinates

Sparse binary input is never densified; centering is folded into the
products (X - 1 mu^T) C = X C - 1 (mu^T C).
"""

import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy import linalg, sparse

from apps.core.exceptions import ArgumentError, DimensionMismatchError, InsufficientSamplesError
from apps.dataset.matrices import as_dense_matrix
from apps.mbn.sparse import SparseBinaryMatrix

logger = logging.getLogger('compressive_mbn.empca')

RIDGE = 1e-12
SINGULAR_CONDITION = 1e12


@dataclass(frozen=True)
class EmpcaConfig:
    target_dim: int
    max_iters: int = 200
    tol: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.target_dim < 1:
            raise ArgumentError(f"target_dim must be at least 1, got {self.target_dim}")
        if self.max_iters < 1:
            raise ArgumentError(f"max_iters must be at least 1, got {self.max_iters}")
        if not self.tol > 0:
            raise ArgumentError(f"tol must be positive, got {self.tol}")

    def to_dict(self):
        return {
            'target_dim': self.target_dim,
            'max_iters': self.max_iters,
            'tol': self.tol,
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass(frozen=True, eq=False)
class PcaModel:
    """Mean vector plus orthonormal projection rows, ordered by explained variance"""

    mean: np.ndarray
    basis: np.ndarray
    explained_variance: np.ndarray = field(default=None)

    def __post_init__(self):
        mean = np.ascontiguousarray(self.mean, dtype=np.float64)
        basis = np.ascontiguousarray(self.basis, dtype=np.float64)
        if basis.ndim != 2 or mean.shape != (basis.shape[1],):
            raise ArgumentError("basis must be d_out x d_in and mean must have d_in entries")
        if basis.shape[0] > basis.shape[1]:
            raise ArgumentError("d_out cannot exceed d_in")
        variance = self.explained_variance
        variance = np.zeros(basis.shape[0]) if variance is None else np.asarray(variance, dtype=np.float64)
        for array in (mean, basis, variance):
            array.setflags(write=False)
        object.__setattr__(self, 'mean', mean)
        object.__setattr__(self, 'basis', basis)
        object.__setattr__(self, 'explained_variance', variance)

    @property
    def d_out(self):
        return self.basis.shape[0]

    @property
    def d_in(self):
        return self.basis.shape[1]

    def reconstruction_error(self, x):
        """Squared Frobenius residual of the centred data outside the subspace"""
        data = _CenteredData(_as_matrix(x))
        if data.cols != self.d_in:
            raise DimensionMismatchError('PCA input', self.d_in, data.cols)
        data.mean = self.mean
        return data.residual(self.basis.T)

    def __eq__(self, other):
        if not isinstance(other, PcaModel):
            return NotImplemented
        return (
            np.array_equal(self.mean, other.mean)
            and np.array_equal(self.basis, other.basis)
            and np.array_equal(self.explained_variance, other.explained_variance)
        )


@dataclass(frozen=True)
class EmpcaResult:
    model: PcaModel
    reconstruction_errors: List[float]
    iterations: int
    converged: bool


def _as_matrix(x):
    if isinstance(x, SparseBinaryMatrix):
        return x.matrix
    if sparse.issparse(x):
        return sparse.csr_matrix(x)
    return as_dense_matrix(x, 'EM-PCA input')


class _CenteredData:
    """Products with X - 1 mu^T without forming the centred matrix"""

    def __init__(self, matrix):
        self.matrix = matrix
        self.rows, self.cols = matrix.shape
        self.mean = np.asarray(matrix.mean(axis=0)).ravel()

    def times(self, c):
        """(X - 1 mu^T) C, n x d"""
        return np.asarray(self.matrix @ c) - self.mean @ c

    def transpose_times(self, z):
        """(X - 1 mu^T)^T Z, D x d"""
        return np.asarray(self.matrix.T @ z) - np.outer(self.mean, z.sum(axis=0))

    def total_energy(self):
        if sparse.issparse(self.matrix):
            squares = self.matrix.multiply(self.matrix).sum()
        else:
            squares = np.einsum('ij,ij->', self.matrix, self.matrix)
        column_sums = np.asarray(self.matrix.sum(axis=0)).ravel()
        # ||X - 1 mu^T||^2 = ||X||^2 - 2 mu.(1^T X) + n ||mu||^2
        energy = float(squares) - 2.0 * float(self.mean @ column_sums) + self.rows * float(self.mean @ self.mean)
        return max(energy, 0.0)

    def residual(self, orthonormal_columns):
        projected = self.times(orthonormal_columns)
        return max(self.total_energy() - float(np.einsum('ij,ij->', projected, projected)), 0.0)


def _solve_normal(gram, rhs):
    """Solve gram @ out = rhs, adding a tiny ridge when gram is near-singular"""
    if np.linalg.cond(gram) > SINGULAR_CONDITION:
        scale = max(float(np.trace(gram)) / gram.shape[0], 1.0)
        gram = gram + RIDGE * scale * np.eye(gram.shape[0])
    return linalg.solve(gram, rhs, assume_a='sym')


def _orthonormalize(c):
    q, _ = np.linalg.qr(c)
    return q


def subspace_change(old_columns, new_columns):
    """
    Frobenius distance between the projectors onto two orthonormal column
    bases: sqrt(2) times the norm of the new basis component outside the old
    subspace.
    """
    outside = new_columns - old_columns @ (old_columns.T @ new_columns)
    return float(np.sqrt(2.0) * np.linalg.norm(outside))


def run_empca(x, config):
    """Fit EM-PCA and return the model with its per-iteration error trace"""
    matrix = _as_matrix(x)
    n, cols = matrix.shape
    if n < 2:
        raise InsufficientSamplesError(f"EM-PCA needs at least 2 rows, got {n}")
    if config.target_dim > cols:
        raise ArgumentError(f"target_dim {config.target_dim} exceeds the {cols} input columns")

    data = _CenteredData(matrix)
    rng = np.random.default_rng(config.seed)
    c = rng.standard_normal((cols, config.target_dim))
    q = _orthonormalize(c)
    errors = [data.residual(q)]
    converged = False
    iterations = 0

    for iterations in range(1, config.max_iters + 1):
        # E-step
        z = _solve_normal(c.T @ c, data.times(c).T).T
        # M-step
        c = _solve_normal(z.T @ z, data.transpose_times(z).T).T

        q_new = _orthonormalize(c)
        errors.append(data.residual(q_new))
        change = subspace_change(q, q_new)
        q = q_new
        if change < config.tol:
            converged = True
            break

    logger.info(
        f"EM-PCA to {config.target_dim} dims: {iterations} iterations, "
        f"converged={converged}, residual={errors[-1]:.6g}"
    )

    # Rotate inside the subspace onto principal axes
    projected = data.times(q)
    eigenvalues, rotation = linalg.eigh(projected.T @ projected)
    order = np.argsort(eigenvalues)[::-1]
    basis = (q @ rotation[:, order]).T
    signs = np.sign(basis[np.arange(basis.shape[0]), np.abs(basis).argmax(axis=1)])
    basis = basis * np.where(signs == 0, 1.0, signs)[:, None]
    variance = np.clip(eigenvalues[order], 0.0, None) / (n - 1)

    model = PcaModel(mean=data.mean, basis=basis, explained_variance=variance)
    return EmpcaResult(model=model, reconstruction_errors=errors, iterations=iterations, converged=converged)


def fit_empca(x, config):
    """Fit a PcaModel with EM-PCA"""
    return run_empca(x, config).model


def pca_project(model, x):
    """(x - mean) basis^T for every row"""
    matrix = _as_matrix(x)
    if matrix.shape[1] != model.d_in:
        raise DimensionMismatchError('PCA projection input', model.d_in, matrix.shape[1])
    return np.asarray(matrix @ model.basis.T) - model.mean @ model.basis.T
