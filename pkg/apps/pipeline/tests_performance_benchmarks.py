"""
Prediction Latency Benchmarks
=============================

Scaled-down checks of the teacher/student latency claims:
1. Teacher prediction cost grows with the number of rows
2. The distilled student predicts much faster than the full teacher path

These tests time real work and take tens of seconds.
"""

import numpy as np
from django.test import SimpleTestCase

from apps.cluster_eval.kmeans import KmeansConfig, kmeans
from apps.dataset.synthetic import make_synthetic_gaussians
from apps.empca.subspace import EmpcaConfig, pca_project, run_empca
from apps.mbn.network import MbnConfig, train_mbn_with_output
from apps.mlp.network import SIGMOID, MlpConfig, init_mlp
from .benchmark import StudentPredictor, TeacherPredictor, benchmark_prediction


def fit_teacher(x, mbn_config, target_dim, k):
    mbn, representation = train_mbn_with_output(x, mbn_config)
    pca = run_empca(representation, EmpcaConfig(target_dim=target_dim, max_iters=50)).model
    clusters = kmeans(pca_project(pca, representation), KmeansConfig(k=k, n_restarts=2))
    return TeacherPredictor(mbn, pca, clusters)


class TeacherScalingTests(SimpleTestCase):
    """Teacher prediction is linear in the number of rows"""

    def test_doubling_rows_increases_teacher_time(self):
        rng = np.random.default_rng(0)
        x_train = rng.normal(size=(300, 64))
        teacher = fit_teacher(x_train, MbnConfig((128, 64), 20, seed=0), target_dim=5, k=3)

        small = benchmark_prediction(teacher, rng.normal(size=(2000, 64)), repeats=3)
        large = benchmark_prediction(teacher, rng.normal(size=(4000, 64)), repeats=3)

        self.assertGreaterEqual(large.min, 1.5 * small.min)


class StudentSpeedupTests(SimpleTestCase):
    """The student path against the desk-scale teacher path"""

    def test_student_is_at_least_five_times_faster(self):
        x_train, _ = make_synthetic_gaussians(0, 200, 3, 10, 10.0)
        x_test, _ = make_synthetic_gaussians(1, 334, 3, 10, 10.0)
        x_test = x_test[:1000]
        teacher = fit_teacher(x_train, MbnConfig((256, 128, 64, 32), 100, seed=0), target_dim=5, k=3)
        # Untrained student with the desk layer sizes
        student = StudentPredictor(
            init_mlp(MlpConfig((10, 256, 256, 3), SIGMOID), np.random.default_rng(0)), decode=True
        )

        teacher_timing = benchmark_prediction(teacher, x_test, repeats=5)
        student_timing = benchmark_prediction(student, x_test, repeats=5)

        self.assertGreater(student_timing.median, 0.0)
        self.assertGreaterEqual(teacher_timing.median / student_timing.median, 5.0)
        for timing in (teacher_timing, student_timing):
            self.assertLessEqual(timing.min, timing.median)
            self.assertLessEqual(timing.median, timing.max)
