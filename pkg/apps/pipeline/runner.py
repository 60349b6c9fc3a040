# apps/pipeline/runner.py
"""
End-to-end runs of the compressive MBN framework.

    teacher:  MBN -> EM-PCA -> (k-means indicator vectors)
    student:  MLP trained on (raw input, teacher output)

Visualization skips k-means and distills the teacher's low-dimensional
embedding directly. Clustering distills one-hot indicator vectors of the
k-means assignment and decodes student output by argmax.
"""

import logging
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
from scipy import linalg
from django.utils import timezone

from apps.cluster_eval.kmeans import KmeansResult, kmeans
from apps.cluster_eval.metrics import labels_to_indicators, nmi
from apps.core.decorators import pipeline_stage
from apps.core.exceptions import ArgumentError, DimensionMismatchError
from apps.dataset.csv_io import save_csv, save_labels_csv
from apps.dataset.matrices import as_dense_matrix
from apps.empca.subspace import PcaModel, pca_project, run_empca
from apps.mbn.network import MbnModel, train_mbn_with_output
from apps.mlp.network import MlpModel, predict, train_mlp
from .benchmark import StudentPredictor, TeacherPredictor, benchmark_prediction
from .config import CLUSTERING, VISUALIZATION
from .container import save_model
from .report import RunReport, summarize_runs

logger = logging.getLogger('compressive_mbn.pipeline')


class VisualizationRun(NamedTuple):
    mbn: MbnModel
    pca: PcaModel
    mlp: MlpModel
    teacher_embedding: np.ndarray
    student_embedding: np.ndarray
    report: RunReport


class ClusteringRun(NamedTuple):
    report: RunReport
    mbn: MbnModel
    pca: PcaModel
    kmeans: KmeansResult
    mlp: MlpModel


def embedding_alignment_error(student, teacher):
    """
    Relative residual of the best least-squares affine map from the student
    embedding onto the teacher embedding: ||[S 1] W - T|| / ||T - mean(T)||.
    """
    student = as_dense_matrix(student, 'student embedding')
    teacher = as_dense_matrix(teacher, 'teacher embedding')
    if student.shape[0] != teacher.shape[0]:
        raise DimensionMismatchError('embedding rows', teacher.shape[0], student.shape[0])
    design = np.column_stack([student, np.ones(student.shape[0])])
    coefficients, _, _, _ = linalg.lstsq(design, teacher)
    residual = float(np.linalg.norm(design @ coefficients - teacher))
    spread = float(np.linalg.norm(teacher - teacher.mean(axis=0)))
    if spread == 0.0:
        # Constant teacher: any fit within rounding of it counts as exact
        tolerance = 1e-12 * max(1.0, float(np.linalg.norm(teacher)))
        return 0.0 if residual <= tolerance else float('inf')
    return residual / spread


def _prepare(config, mode, x):
    if config.mode != mode:
        raise ArgumentError(f"expected a {mode} config, got mode={config.mode!r}")
    x = as_dense_matrix(x, 'training input')
    if x.shape[1] != config.input_dim:
        config = config.with_input_dim(x.shape[1])
    return config, x


@pipeline_stage('mbn')
def train_teacher_network(x, config):
    return train_mbn_with_output(x, config.mbn, config.threads)


@pipeline_stage('empca')
def fit_teacher_embedding(representation, config):
    result = run_empca(representation, config.empca)
    return result.model, pca_project(result.model, representation)


@pipeline_stage('kmeans')
def cluster_embedding(embedding, config):
    return kmeans(embedding, config.kmeans, config.threads)


@pipeline_stage('distill')
def distill_student(x, targets, config):
    return train_mlp(x, targets, config.mlp)


@pipeline_stage('evaluate')
def score_predictions(truth_train, truth_test, predictions):
    """
    NMI of each predicted labeling against the matching ground truth.
    Fields without ground truth are None.
    """
    truth = {'train': truth_train, 'test': truth_test}
    scores = {}
    for name, predicted in predictions.items():
        split = name.rsplit('_', 1)[-1]
        reference = truth[split]
        scores[f'{name}_nmi'] = None if reference is None or predicted is None else nmi(reference, predicted)
    return scores


@pipeline_stage('benchmark')
def time_predictors(teacher, student, x, repeats, threads=1):
    return (
        benchmark_prediction(teacher, x, repeats, threads=threads),
        benchmark_prediction(student, x, repeats, threads=threads),
    )


@pipeline_stage('persist')
def persist_artifacts(out_dir, models, matrices, labelings):
    """Write models as CMBN containers and embeddings/labels as CSV; returns name -> path"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts = {}
    for name, model in models.items():
        path = out_dir / f'{name}.cmbn'
        save_model(path, model)
        artifacts[name] = str(path)
    for name, matrix in matrices.items():
        path = out_dir / f'{name}.csv'
        save_csv(path, matrix)
        artifacts[name] = str(path)
    for name, labels in labelings.items():
        path = out_dir / f'{name}.csv'
        save_labels_csv(path, labels)
        artifacts[name] = str(path)
    return artifacts


def _finish(report_fields, out_dir, artifacts):
    if out_dir is not None:
        artifacts = dict(artifacts, report=str(Path(out_dir) / 'report.json'))
    report = RunReport(artifacts=artifacts, finished_at=timezone.now().isoformat(), **report_fields)
    if out_dir is not None:
        report.write(artifacts['report'])
    return report


def run_visualization(x, config, labels=None, out_dir=None):
    """
    Distill the teacher's 2-D embedding. When labels are given, both
    embeddings are also clustered with k-means and scored by NMI.
    """
    started_at = timezone.now().isoformat()
    config, x = _prepare(config, VISUALIZATION, x)
    logger.info(f"Visualization run on {x.shape[0]}x{x.shape[1]} (seed {config.seed})")

    mbn, representation = train_teacher_network(x, config)
    pca, teacher_embedding = fit_teacher_embedding(representation, config)
    mlp, trace = distill_student(x, teacher_embedding, config)
    student_embedding = predict(mlp, x)
    alignment = embedding_alignment_error(student_embedding, teacher_embedding)
    logger.info(f"Student/teacher embedding alignment error {alignment:.4f}")

    teacher_clusters = student_clusters = None
    if labels is not None and config.kmeans is not None:
        teacher_clusters = cluster_embedding(teacher_embedding, config).labels
        student_clusters = cluster_embedding(student_embedding, config).labels
    scores = score_predictions(labels, None, {
        'teacher_train': teacher_clusters,
        'student_train': student_clusters,
    })

    teacher_timing, student_timing = time_predictors(
        TeacherPredictor(mbn, pca, n_jobs=config.threads),
        StudentPredictor(mlp),
        x,
        config.bench_repeats,
        config.threads,
    )

    artifacts = {}
    if out_dir is not None:
        artifacts = persist_artifacts(
            out_dir,
            models={'mbn': mbn, 'pca': pca, 'mlp': mlp},
            matrices={
                'teacher_embedding': teacher_embedding,
                'student_embedding': student_embedding,
            },
            labelings={},
        )

    report = _finish({
        'mode': VISUALIZATION,
        'seed': config.seed,
        'threads': config.threads,
        'n_train': x.shape[0],
        'n_test': x.shape[0],
        'teacher_timing': teacher_timing,
        'student_timing': student_timing,
        'config': config.to_dict(),
        'started_at': started_at,
        'embedding_alignment_error': alignment,
        'student_epoch_losses': trace.epoch_losses,
        **scores,
    }, out_dir, artifacts)
    return VisualizationRun(mbn, pca, mlp, teacher_embedding, student_embedding, report)


def run_clustering(x_train, x_test, config, labels_train=None, labels_test=None, out_dir=None):
    """
    Train the teacher on x_train, distill its k-means indicator vectors and
    compare both paths on x_test. Ground truth is only used for scoring.
    """
    started_at = timezone.now().isoformat()
    config, x_train = _prepare(config, CLUSTERING, x_train)
    x_test = as_dense_matrix(x_test, 'test input')
    if x_test.shape[1] != x_train.shape[1]:
        raise DimensionMismatchError('test input', x_train.shape[1], x_test.shape[1])
    logger.info(
        f"Clustering run: {x_train.shape[0]} train / {x_test.shape[0]} test rows, "
        f"{x_train.shape[1]} features (seed {config.seed})"
    )

    mbn, representation = train_teacher_network(x_train, config)
    pca, train_embedding = fit_teacher_embedding(representation, config)
    clusters = cluster_embedding(train_embedding, config)
    targets = labels_to_indicators(clusters.labels, clusters.k)
    mlp, trace = distill_student(x_train, targets, config)

    teacher = TeacherPredictor(mbn, pca, clusters, n_jobs=config.threads)
    student = StudentPredictor(mlp, decode=True)
    predictions = {
        'teacher_train': clusters.labels,
        'teacher_test': teacher.predict(x_test),
        'student_train': student.predict(x_train),
        'student_test': student.predict(x_test),
    }
    scores = score_predictions(labels_train, labels_test, predictions)

    teacher_timing, student_timing = time_predictors(
        teacher, student, x_test, config.bench_repeats, config.threads
    )

    artifacts = {}
    if out_dir is not None:
        artifacts = persist_artifacts(
            out_dir,
            models={'mbn': mbn, 'pca': pca, 'kmeans': clusters, 'mlp': mlp},
            matrices={},
            labelings={f'{name}_labels': labels for name, labels in predictions.items()},
        )

    report = _finish({
        'mode': CLUSTERING,
        'seed': config.seed,
        'threads': config.threads,
        'n_train': x_train.shape[0],
        'n_test': x_test.shape[0],
        'teacher_timing': teacher_timing,
        'student_timing': student_timing,
        'config': config.to_dict(),
        'started_at': started_at,
        'student_epoch_losses': trace.epoch_losses,
        **scores,
    }, out_dir, artifacts)
    if report.speedup_factor is not None:
        logger.info(f"Student prediction speedup {report.speedup_factor:.1f}x")
    return ClusteringRun(report, mbn, pca, clusters, mlp)


def run_repeated(x_train, x_test, config, runs, labels_train=None, labels_test=None, out_dir=None):
    """
    Repeat the clustering run over seeds config.seed, config.seed + 1, ...
    Returns the per-run reports and their summary.
    """
    if runs < 1:
        raise ArgumentError(f"runs must be at least 1, got {runs}")
    reports = []
    for index in range(runs):
        run_dir = None if out_dir is None else Path(out_dir) / f'run_{index + 1:02d}'
        run = run_clustering(
            x_train, x_test, config.with_seed(config.seed + index),
            labels_train=labels_train, labels_test=labels_test, out_dir=run_dir,
        )
        reports.append(run.report)
    summary = summarize_runs(reports)
    logger.info(f"Completed {runs} runs: {summary.nmi}")
    return reports, summary
