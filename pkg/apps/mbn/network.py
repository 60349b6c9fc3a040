# apps/mbn/network.py
"""
Multilayer bootstrap network.

Each layer is an ensemble of V k-centers clusterings. A clustering observes a
random subset of the input dimensions and uses k randomly sampled input rows
as its centers; a sample is encoded by the index of its nearest center, so a
layer maps every row to a sparse binary vector with exactly V active units.
Layer 1 compares real-valued input by euclidean distance, upper layers compare
sparse binary rows by dot product (the count of agreeing clusterings).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.spatial.distance import cdist

from apps.core.exceptions import (
    ArgumentError,
    DimensionMismatchError,
    InsufficientSamplesError,
)
from apps.dataset.matrices import as_dense_matrix
from .sparse import SparseBinaryMatrix

logger = logging.getLogger('compressive_mbn.mbn')

EUCLIDEAN = 'euclidean'
DOT_PRODUCT = 'dot'
METRICS = (EUCLIDEAN, DOT_PRODUCT)


@dataclass(frozen=True)
class MbnConfig:
    """Hyperparameters shared by every layer"""

    k_schedule: Tuple[int, ...]
    clusterings_per_layer: int
    feature_fraction: float = 0.5
    reconstruction_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        schedule = tuple(int(k) for k in self.k_schedule)
        object.__setattr__(self, 'k_schedule', schedule)
        if not schedule:
            raise ArgumentError("k_schedule must not be empty")
        if any(k < 2 for k in schedule):
            raise ArgumentError(f"every k must be at least 2, got {list(schedule)}")
        if any(later > earlier for earlier, later in zip(schedule, schedule[1:])):
            raise ArgumentError(f"k_schedule must be non-increasing, got {list(schedule)}")
        if self.clusterings_per_layer < 1:
            raise ArgumentError("clusterings_per_layer must be at least 1")
        if not 0.0 < self.feature_fraction <= 1.0:
            raise ArgumentError(f"feature_fraction must lie in (0, 1], got {self.feature_fraction}")
        if not 0.0 <= self.reconstruction_rate <= 1.0:
            raise ArgumentError(f"reconstruction_rate must lie in [0, 1], got {self.reconstruction_rate}")

    def to_dict(self):
        return {
            'k_schedule': list(self.k_schedule),
            'clusterings_per_layer': self.clusterings_per_layer,
            'feature_fraction': self.feature_fraction,
            'reconstruction_rate': self.reconstruction_rate,
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass(frozen=True, eq=False)
class CentersClustering:
    """
    One k-centers clustering: the observed input dimensions and the sampled
    centers restricted to them. Centers are a dense array for real-valued
    input and a CSR matrix for sparse binary input.
    """

    feature_subset: np.ndarray
    centers: object

    def __post_init__(self):
        subset = np.asarray(self.feature_subset, dtype=np.int64)
        if subset.ndim != 1 or subset.size == 0:
            raise ArgumentError("feature_subset must be a non-empty vector")
        if np.any(np.diff(subset) <= 0) or subset[0] < 0:
            raise ArgumentError("feature_subset must be strictly increasing and non-negative")
        if self.k < 2:
            raise ArgumentError(f"a clustering needs at least 2 centers, got {self.k}")
        if self.centers.shape[1] != subset.size:
            raise ArgumentError("centers must have one column per selected feature")
        subset.setflags(write=False)
        object.__setattr__(self, 'feature_subset', subset)
        if isinstance(self.centers, np.ndarray):
            self.centers.setflags(write=False)

    @property
    def k(self):
        return self.centers.shape[0]

    @property
    def is_sparse(self):
        return sparse.issparse(self.centers)

    def __eq__(self, other):
        if not isinstance(other, CentersClustering):
            return NotImplemented
        if not np.array_equal(self.feature_subset, other.feature_subset):
            return False
        if self.is_sparse != other.is_sparse or self.centers.shape != other.centers.shape:
            return False
        if self.is_sparse:
            return (self.centers != other.centers).nnz == 0
        return np.array_equal(self.centers, other.centers)


@dataclass(frozen=True)
class MbnLayer:
    clusterings: Tuple[CentersClustering, ...]
    input_dim: int
    metric: str

    def __post_init__(self):
        object.__setattr__(self, 'clusterings', tuple(self.clusterings))
        if not self.clusterings:
            raise ArgumentError("a layer needs at least one clustering")
        if self.metric not in METRICS:
            raise ArgumentError(f"metric must be one of {METRICS}, got {self.metric!r}")
        ks = {c.k for c in self.clusterings}
        if len(ks) != 1:
            raise ArgumentError(f"all clusterings of a layer share one k, got {sorted(ks)}")
        if any(c.feature_subset[-1] >= self.input_dim for c in self.clusterings):
            raise ArgumentError("feature index beyond the layer input dimensionality")

    @property
    def k(self):
        return self.clusterings[0].k

    @property
    def output_dim(self):
        return len(self.clusterings) * self.k

    def encode(self, x, n_jobs=1):
        """Map rows of x to this layer's sparse binary representation"""
        if _input_dim(x) != self.input_dim:
            raise DimensionMismatchError('MBN layer input', self.input_dim, _input_dim(x))
        columns = _map(lambda c: encode_rows(x, c, self.metric), self.clusterings, n_jobs)
        return SparseBinaryMatrix.from_assignments(np.column_stack(columns), self.k)


@dataclass(frozen=True)
class MbnModel:
    layers: Tuple[MbnLayer, ...]
    config: MbnConfig = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'layers', tuple(self.layers))
        for lower, upper in zip(self.layers, self.layers[1:]):
            if upper.input_dim != lower.output_dim:
                raise ArgumentError(
                    f"layer input {upper.input_dim} does not match previous output {lower.output_dim}"
                )

    @property
    def input_dim(self):
        return self.layers[0].input_dim

    @property
    def output_dim(self):
        return self.layers[-1].output_dim

    @property
    def output_dims(self):
        return [layer.output_dim for layer in self.layers]

    def layer_outputs(self, x, n_jobs=1):
        """Representation of x at every layer, bottom to top"""
        current = _check_transform_input(self, x)
        outputs = []
        for layer in self.layers:
            current = layer.encode(current, n_jobs)
            outputs.append(current)
        return outputs


def _n_rows(x):
    return x.shape[0]


def _input_dim(x):
    return x.shape[1]


def _map(func, items, n_jobs):
    if n_jobs is None or n_jobs <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as executor:
        return list(executor.map(func, items))


def _select_columns(x, subset):
    if isinstance(x, SparseBinaryMatrix):
        return x.matrix[:, subset]
    return x[:, subset]


def sample_clustering(x, k, a, r, rng):
    """
    Build one k-centers clustering from a bootstrap sample of x.

    Selects ceil(a * input_dim) distinct dimensions uniformly, then k distinct
    rows as centers. With r > 0 every (center, feature) entry is replaced,
    with probability r, by the same feature of a uniformly re-sampled row.
    """
    if not 0.0 < a <= 1.0:
        raise ArgumentError(f"feature fraction must lie in (0, 1], got {a}")
    if not 0.0 <= r <= 1.0:
        raise ArgumentError(f"reconstruction rate must lie in [0, 1], got {r}")
    if k < 2:
        raise ArgumentError(f"k must be at least 2, got {k}")
    n, d = _n_rows(x), _input_dim(x)
    if k > n:
        raise InsufficientSamplesError(f"cannot sample {k} centers from {n} rows")

    m = min(d, max(1, math.ceil(a * d)))
    subset = np.sort(rng.choice(d, size=m, replace=False))
    rows = rng.choice(n, size=k, replace=False)

    if isinstance(x, SparseBinaryMatrix):
        centers = x.matrix[rows][:, subset]
        if r > 0:
            centers = centers.tolil()
            for i in range(k):
                cols = np.flatnonzero(rng.random(m) < r)
                if cols.size:
                    donors = rng.integers(0, n, size=cols.size)
                    values = np.asarray(x.matrix[donors, subset[cols]]).ravel()
                    centers[i, cols] = values
            centers = centers.tocsr()
        centers = sparse.csr_matrix(centers)
        centers.eliminate_zeros()
        centers.sort_indices()
    else:
        centers = x[np.ix_(rows, subset)].copy()
        if r > 0:
            mask = rng.random((k, m)) < r
            donors = rng.integers(0, n, size=(k, m))
            _, mask_cols = np.nonzero(mask)
            centers[mask] = x[donors[mask], subset[mask_cols]]

    return CentersClustering(feature_subset=subset, centers=centers)


def encode_rows(x, clustering, metric):
    """Nearest-center index for every row of x; ties go to the lowest index"""
    if clustering.feature_subset[-1] >= _input_dim(x):
        raise DimensionMismatchError(
            'clustering input', int(clustering.feature_subset[-1]) + 1, _input_dim(x)
        )
    observed = _select_columns(x, clustering.feature_subset)
    centers = clustering.centers

    if metric == EUCLIDEAN:
        if sparse.issparse(observed):
            observed = observed.toarray()
        if sparse.issparse(centers):
            centers = centers.toarray()
        return cdist(observed, centers, 'sqeuclidean').argmin(axis=1)

    if metric == DOT_PRODUCT:
        scores = observed @ centers.T
        if sparse.issparse(scores):
            scores = scores.toarray()
        return np.asarray(scores).argmax(axis=1)

    raise ArgumentError(f"metric must be one of {METRICS}, got {metric!r}")


def encode_clustering(x, clustering, metric):
    """Active index in [0, k) for a single row vector"""
    if isinstance(x, SparseBinaryMatrix):
        row = x
    else:
        row = np.asarray(x, dtype=np.float64).reshape(1, -1)
    return int(encode_rows(row, clustering, metric)[0])


def train_mbn(x, config, n_jobs=1):
    """
    Train an MBN on x layer by layer.

    Every clustering gets its own rng stream derived from config.seed, so the
    model is identical for any n_jobs.
    """
    model, _ = train_mbn_with_output(x, config, n_jobs)
    return model


def train_mbn_with_output(x, config, n_jobs=1):
    """train_mbn that also returns the top-layer representation of x"""
    x = as_dense_matrix(x, 'MBN training input')
    n = _n_rows(x)
    for index, k in enumerate(config.k_schedule, start=1):
        if k > n:
            raise InsufficientSamplesError(
                f"layer {index}: k={k} exceeds the {n} training rows"
            )

    v = config.clusterings_per_layer
    layer_streams = np.random.SeedSequence(config.seed).spawn(len(config.k_schedule))
    current = x
    layers = []
    for index, (k, stream) in enumerate(zip(config.k_schedule, layer_streams), start=1):
        metric = EUCLIDEAN if index == 1 else DOT_PRODUCT
        rngs = [np.random.default_rng(s) for s in stream.spawn(v)]
        clusterings = _map(
            lambda rng: sample_clustering(
                current, k, config.feature_fraction, config.reconstruction_rate, rng
            ),
            rngs,
            n_jobs,
        )
        layer = MbnLayer(clusterings=clusterings, input_dim=_input_dim(current), metric=metric)
        logger.info(
            f"Layer {index}: {v} clusterings of k={k} on {layer.input_dim} inputs ({metric})"
        )
        current = layer.encode(current, n_jobs)
        layers.append(layer)

    return MbnModel(layers=layers, config=config), current


def _check_transform_input(model, x):
    if isinstance(x, SparseBinaryMatrix):
        raise ArgumentError("MBN transform expects real-valued input rows")
    x = as_dense_matrix(x, 'MBN transform input')
    if _input_dim(x) != model.input_dim:
        raise DimensionMismatchError('MBN transform input', model.input_dim, _input_dim(x))
    return x


def mbn_transform(model, x, n_jobs=1):
    """Forward pass through every layer; returns the top-layer representation"""
    current = _check_transform_input(model, x)
    for layer in model.layers:
        current = layer.encode(current, n_jobs)
    return current
