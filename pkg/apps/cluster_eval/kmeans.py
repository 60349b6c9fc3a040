# apps/cluster_eval/kmeans.py
"""
Lloyd k-means with random-distinct-row initialization and restarts.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.spatial.distance import cdist

from apps.core.exceptions import ArgumentError, DimensionMismatchError, InsufficientSamplesError
from apps.dataset.matrices import LabelVector, as_dense_matrix

logger = logging.getLogger('compressive_mbn.cluster_eval')


@dataclass(frozen=True)
class KmeansConfig:
    k: int
    n_restarts: int = 10
    max_iters: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ArgumentError(f"k must be at least 1, got {self.k}")
        if self.n_restarts < 1:
            raise ArgumentError(f"n_restarts must be at least 1, got {self.n_restarts}")
        if self.max_iters < 1:
            raise ArgumentError(f"max_iters must be at least 1, got {self.max_iters}")

    def to_dict(self):
        return {
            'k': self.k,
            'n_restarts': self.n_restarts,
            'max_iters': self.max_iters,
            'seed': self.seed,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


@dataclass(frozen=True, eq=False)
class KmeansResult:
    labels: LabelVector
    centers: np.ndarray
    inertia: float
    inertia_trace: List[float] = field(default_factory=list)
    restart_inertias: List[float] = field(default_factory=list)

    @property
    def k(self):
        return self.centers.shape[0]

    def __eq__(self, other):
        if not isinstance(other, KmeansResult):
            return NotImplemented
        return (
            self.labels == other.labels
            and np.array_equal(self.centers, other.centers)
            and self.inertia == other.inertia
        )


def squared_distances(x, centers):
    """Exact pairwise squared euclidean distances, n x k"""
    return cdist(x, centers, 'sqeuclidean')


def assign_nearest_center(x, centers):
    """Label every row with its nearest center; ties go to the lowest index"""
    x = as_dense_matrix(x, 'assignment input')
    centers = as_dense_matrix(centers, 'centers')
    if x.shape[1] != centers.shape[1]:
        raise DimensionMismatchError('assignment input', centers.shape[1], x.shape[1])
    if x.shape[0] == 0:
        return LabelVector(labels=np.zeros(0, dtype=np.int64), num_classes=centers.shape[0])
    labels = squared_distances(x, centers).argmin(axis=1)
    return LabelVector(labels=labels, num_classes=centers.shape[0])


def compute_inertia(x, labels, centers):
    """Sum of squared distances of every row to its assigned center"""
    residual = x - centers[labels]
    return float(np.einsum('ij,ij->', residual, residual))


def _reseed_empty(x, labels, distances, centers, k):
    """
    Move each empty center onto the farthest row of a cluster that keeps at
    least one other member, so no reseed empties another cluster.
    """
    row_cost = distances[np.arange(x.shape[0]), labels].copy()
    counts = np.bincount(labels, minlength=k)
    for empty in np.flatnonzero(counts == 0):
        donors = np.flatnonzero(counts[labels] > 1)
        farthest = int(donors[row_cost[donors].argmax()])
        counts[labels[farthest]] -= 1
        labels[farthest] = empty
        centers[empty] = x[farthest]
        row_cost[farthest] = 0.0
        counts[empty] = 1
    return labels


def _lloyd(x, k, max_iters, rng):
    n = x.shape[0]
    centers = x[rng.choice(n, size=k, replace=False)].copy()
    previous = None
    trace = []
    for _ in range(max_iters):
        distances = squared_distances(x, centers)
        assigned = distances.argmin(axis=1)
        trace.append(float(distances[np.arange(n), assigned].sum()))
        # Converged once the nearest-center assignment repeats
        if previous is not None and np.array_equal(assigned, previous):
            break
        previous = assigned
        labels = _reseed_empty(x, assigned.copy(), distances, centers, k)
        for cluster in range(k):
            centers[cluster] = x[labels == cluster].mean(axis=0)
    labels = squared_distances(x, centers).argmin(axis=1)
    return labels, centers, compute_inertia(x, labels, centers), trace


def kmeans(x, config, n_jobs=1):
    """
    Best-inertia Lloyd run over config.n_restarts restarts. Restart i uses its
    own rng stream derived from config.seed; ties in inertia go to the lowest
    restart index.
    """
    x = as_dense_matrix(x, 'k-means input')
    if x.shape[0] < config.k:
        raise InsufficientSamplesError(
            f"k-means with k={config.k} needs at least {config.k} rows, got {x.shape[0]}"
        )
    streams = np.random.SeedSequence(config.seed).spawn(config.n_restarts)

    def restart(stream):
        return _lloyd(x, config.k, config.max_iters, np.random.default_rng(stream))

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as executor:
            runs = list(executor.map(restart, streams))
    else:
        runs = [restart(stream) for stream in streams]

    inertias = [run[2] for run in runs]
    best = min(range(len(runs)), key=lambda index: (inertias[index], index))
    labels, centers, inertia, trace = runs[best]
    logger.info(
        f"k-means k={config.k}: best inertia {inertia:.6g} from restart {best + 1}/{config.n_restarts}"
    )
    centers.setflags(write=False)
    return KmeansResult(
        labels=LabelVector(labels=labels, num_classes=config.k),
        centers=centers,
        inertia=inertia,
        inertia_trace=trace,
        restart_inertias=inertias,
    )
