# apps/pipeline/benchmark.py
"""
Prediction latency of the teacher path and the student network.
"""

import logging
import time
from dataclasses import dataclass
from typing import Optional

from threadpoolctl import threadpool_limits

from apps.cluster_eval.kmeans import KmeansResult, assign_nearest_center
from apps.cluster_eval.metrics import indicators_to_labels
from apps.core.exceptions import ArgumentError
from apps.empca.subspace import PcaModel, pca_project
from apps.mbn.network import MbnModel, mbn_transform
from apps.mlp.network import MlpModel, predict
from .report import Timing

logger = logging.getLogger('compressive_mbn.bench')


@dataclass(frozen=True)
class TeacherPredictor:
    """
    MBN transform followed by the PCA projection and, when k-means centers
    are given, nearest-center assignment.
    """

    mbn: MbnModel
    pca: PcaModel
    kmeans: Optional[KmeansResult] = None
    n_jobs: int = 1
    name: str = 'teacher'

    def predict(self, x):
        embedding = pca_project(self.pca, mbn_transform(self.mbn, x, self.n_jobs))
        if self.kmeans is None:
            return embedding
        return assign_nearest_center(embedding, self.kmeans.centers)


@dataclass(frozen=True)
class StudentPredictor:
    """Inference-mode forward pass, argmax-decoded when the output is an indicator vector"""

    mlp: MlpModel
    decode: bool = False
    name: str = 'student'

    def predict(self, x):
        outputs = predict(self.mlp, x)
        return indicators_to_labels(outputs) if self.decode else outputs


def benchmark_prediction(predictor, x, repeats, clock=time.perf_counter, threads=1):
    """
    Time full-batch prediction on x: one untimed warm-up pass, then `repeats`
    timed passes on a monotonic clock.

    Native BLAS and OpenMP pools are capped at `threads` for the warm-up and
    every timed pass, so both predictors run under the same thread setting.
    """
    if repeats < 1:
        raise ArgumentError(f"repeats must be at least 1, got {repeats}")
    if threads < 1:
        raise ArgumentError(f"threads must be at least 1, got {threads}")
    if isinstance(predictor, MlpModel):
        predictor = StudentPredictor(predictor)

    samples = []
    with threadpool_limits(limits=threads):
        predictor.predict(x)
        for _ in range(repeats):
            started = clock()
            predictor.predict(x)
            samples.append(max(clock() - started, 0.0))

    timing = Timing.from_samples(samples, threads=threads)
    logger.info(
        f"{getattr(predictor, 'name', type(predictor).__name__)} on {x.shape[0]} rows: "
        f"median {timing.median:.6f}s min {timing.min:.6f}s max {timing.max:.6f}s ({repeats} repeats, {threads} threads)"
    )
    return timing
