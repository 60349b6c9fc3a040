"""
End-to-end pipeline tests on synthetic Gaussian data, through the runner
functions and through the management commands.
"""

import inspect
import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from apps.cluster_eval.kmeans import kmeans
from apps.dataset.csv_io import load_labels_csv, save_csv
from apps.dataset.synthetic import make_synthetic_gaussians
from apps.empca.subspace import EmpcaConfig, fit_empca
from .config import VISUALIZATION, build_pipeline_config
from .container import save_model
from .models import PipelineRun
from .report import RunReport
from .runner import run_clustering, run_visualization

SMALL_RUN = {
    'mbn': {'k_schedule': [64, 32, 16], 'clusterings_per_layer': 20},
    'mlp': {'epochs': 10},
}


def synthetic_split(seed):
    x_train, labels_train = make_synthetic_gaussians(seed, 200, 3, 10, 10.0)
    x_test, labels_test = make_synthetic_gaussians(seed + 1, 100, 3, 10, 10.0)
    return x_train, x_test, labels_train, labels_test


class ClusteringParityTests(SimpleTestCase):
    """The distilled student matches the teacher on well-separated classes"""

    def test_student_tracks_teacher_over_seeds(self):
        for seed in range(3):
            with self.subTest(seed=seed):
                x_train, x_test, labels_train, labels_test = synthetic_split(seed)
                config = build_pipeline_config(num_classes=3, input_dim=10, bench_repeats=1, seed=seed)

                report = run_clustering(x_train, x_test, config, labels_train, labels_test).report

                self.assertGreaterEqual(report.teacher_test_nmi, 0.9)
                self.assertLessEqual(abs(report.student_train_nmi - report.teacher_train_nmi), 0.05)
                self.assertLessEqual(abs(report.student_test_nmi - report.teacher_test_nmi), 0.05)
                self.assertEqual((report.n_train, report.n_test), (600, 300))
                self.assertEqual(len(report.student_epoch_losses), config.mlp.epochs)

    def test_same_seed_reproduces_the_scores(self):
        x_train, x_test, labels_train, labels_test = synthetic_split(7)
        config = build_pipeline_config(
            overrides=SMALL_RUN, num_classes=3, input_dim=10, bench_repeats=1, seed=7
        )

        first = run_clustering(x_train, x_test, config, labels_train, labels_test)
        second = run_clustering(x_train, x_test, config, labels_train, labels_test)

        self.assertEqual(first.report.nmi_fields(), second.report.nmi_fields())
        self.assertEqual(first.report.student_epoch_losses, second.report.student_epoch_losses)
        self.assertEqual(first.mbn, second.mbn)


class LabelIsolationTests(SimpleTestCase):
    """Ground truth reaches the clustering run only through scoring"""

    def test_labels_are_only_passed_to_scoring(self):
        lines = [
            line.strip()
            for line in inspect.getsource(run_clustering).splitlines()
            if 'labels_train' in line or 'labels_test' in line
        ]
        self.assertEqual(len(lines), 2)
        self.assertTrue(lines[0].startswith('def run_clustering('))
        self.assertIn('score_predictions(labels_train, labels_test', lines[1])

    def test_labels_do_not_change_the_models(self):
        x_train, x_test, labels_train, labels_test = synthetic_split(3)
        config = build_pipeline_config(
            overrides={**SMALL_RUN, 'kmeans': {'k': 3}}, input_dim=10, bench_repeats=1, seed=3
        )

        labelled = run_clustering(x_train, x_test, config, labels_train, labels_test)
        unlabelled = run_clustering(x_train, x_test, config)

        self.assertEqual(labelled.mbn, unlabelled.mbn)
        self.assertEqual(labelled.kmeans, unlabelled.kmeans)
        self.assertEqual(labelled.mlp, unlabelled.mlp)

    def test_missing_labels_leave_out_the_nmi_keys(self):
        x_train, x_test, _, _ = synthetic_split(0)
        config = build_pipeline_config(
            overrides={**SMALL_RUN, 'kmeans': {'k': 3}}, input_dim=10, bench_repeats=1
        )

        report = run_clustering(x_train, x_test, config).report

        self.assertTrue(all(value is None for value in report.nmi_fields().values()))
        self.assertFalse(any(key.endswith('_nmi') for key in report.to_dict()))


class VisualizationRunTests(SimpleTestCase):

    def test_student_embedding_aligns_with_teacher(self):
        x, _, labels, _ = synthetic_split(0)
        config = build_pipeline_config(
            mode=VISUALIZATION, num_classes=3, input_dim=10, bench_repeats=1, seed=0
        )

        run = run_visualization(x, config, labels=labels)

        self.assertEqual(run.teacher_embedding.shape, (600, 2))
        self.assertEqual(run.student_embedding.shape, (600, 2))
        self.assertLess(run.report.embedding_alignment_error, 0.15)
        self.assertIsNotNone(run.report.teacher_train_nmi)
        self.assertIsNone(run.report.teacher_test_nmi)

    def test_untrained_student_still_reports(self):
        x, _, _, _ = synthetic_split(1)
        overrides = {**SMALL_RUN, 'mlp': {'epochs': 0}}
        config = build_pipeline_config(mode=VISUALIZATION, overrides=overrides, input_dim=10, bench_repeats=1)

        with tempfile.TemporaryDirectory() as tmp:
            run = run_visualization(x, config, out_dir=tmp)
            restored = RunReport.read(Path(tmp) / 'report.json')

            self.assertEqual(run.report.student_epoch_losses, [])
            self.assertTrue(np.isfinite(run.report.embedding_alignment_error))
            self.assertEqual(restored.mode, VISUALIZATION)
            self.assertEqual(restored.embedding_alignment_error, run.report.embedding_alignment_error)
            for name in ('mbn', 'pca', 'mlp', 'teacher_embedding', 'student_embedding'):
                self.assertTrue(Path(restored.artifacts[name]).exists(), name)


class CommandTests(TestCase):
    """Management commands and their exit codes"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out_dir = Path(self.tmp.name)

    def call(self, name, **options):
        stdout, stderr = StringIO(), StringIO()
        call_command(name, stdout=stdout, stderr=stderr, **options)
        return stdout.getvalue()

    def assertExitCode(self, code, name, **options):
        with np.errstate(all='ignore'):
            with self.assertRaises(CommandError) as ctx:
                self.call(name, **options)
        self.assertEqual(ctx.exception.returncode, code)

    def test_synth_writes_train_and_test_files(self):
        output = self.call('synth', out_dir=str(self.out_dir), seed=3, n_per_class=20, test_per_class=5)

        self.assertIn('Wrote 60x10 training data', output)
        labels = load_labels_csv(self.out_dir / 'test_labels.csv')
        self.assertEqual(len(labels), 15)
        self.assertTrue((self.out_dir / 'train.csv').exists())

    def test_synthetic_pipeline_run(self):
        config_path = self.out_dir / 'small.json'
        config_path.write_text(json.dumps({**SMALL_RUN, 'bench_repeats': 1}), encoding='utf-8')

        output = self.call('pipeline', synthetic=True, config=str(config_path), out_dir=str(self.out_dir))

        run = PipelineRun.objects.get()
        self.assertEqual(run.status, PipelineRun.Status.COMPLETED)
        self.assertIn('teacher_test_nmi', run.report)
        self.assertIn('speedup_factor:', output)
        for name in ('report.json', 'mbn.cmbn', 'pca.cmbn', 'kmeans.cmbn', 'mlp.cmbn'):
            self.assertTrue((self.out_dir / name).exists(), name)

    def test_missing_input_is_a_usage_error(self):
        self.assertExitCode(1, 'train_mbn', out_dir=str(self.out_dir))

    def test_ragged_csv_is_a_data_error(self):
        path = self.out_dir / 'ragged.csv'
        path.write_text('1,2,3\n4,5\n', encoding='utf-8')
        self.assertExitCode(2, 'train_mbn', input=str(path), out_dir=str(self.out_dir))

    def test_wrong_model_kind_is_a_data_error(self):
        x = np.random.default_rng(0).normal(size=(20, 4))
        pca_path = self.out_dir / 'pca.cmbn'
        save_model(pca_path, fit_empca(x, EmpcaConfig(target_dim=2, max_iters=10)))
        input_path = self.out_dir / 'x.csv'
        save_csv(input_path, x)

        self.assertExitCode(2, 'predict', input=str(input_path), model=str(pca_path), out_dir=str(self.out_dir))

    def test_divergent_distillation_exits_with_three(self):
        x = np.linspace(0.0, 1.0, 20).reshape(-1, 1)
        input_path, targets_path = self.out_dir / 'x.csv', self.out_dir / 'y.csv'
        save_csv(input_path, x)
        save_csv(targets_path, 3.0 * x)

        self.assertExitCode(
            3, 'distill',
            input=str(input_path), targets=str(targets_path), out_dir=str(self.out_dir),
            hidden_sizes=[8], dropout=0.0, learning_rate=1e6, batch_size=1, epochs=200,
        )

    def write_config(self, **extra):
        path = self.out_dir / 'small.json'
        path.write_text(json.dumps({**SMALL_RUN, 'bench_repeats': 1, **extra}), encoding='utf-8')
        return str(path)

    def test_unexpected_failure_marks_the_run_failed(self):
        with mock.patch(
            'apps.pipeline.management.commands.pipeline.run_clustering',
            side_effect=RuntimeError('worker crashed'),
        ):
            with self.assertRaises(RuntimeError):
                self.call('pipeline', synthetic=True, config=self.write_config(), out_dir=str(self.out_dir))

        run = PipelineRun.objects.get()
        self.assertEqual(run.status, PipelineRun.Status.FAILED)
        self.assertIn('worker crashed', run.error_message)

    def test_visualization_on_a_random_training_subset(self):
        self.call(
            'pipeline', synthetic=True, mode=VISUALIZATION, sample=90,
            config=self.write_config(), out_dir=str(self.out_dir),
        )

        run = PipelineRun.objects.get()
        self.assertEqual(run.status, PipelineRun.Status.COMPLETED)
        self.assertEqual(run.report['n_train'], 90)

    def test_sample_larger_than_the_training_set(self):
        self.assertExitCode(
            1, 'pipeline', synthetic=True, mode=VISUALIZATION, sample=601,
            config=self.write_config(), out_dir=str(self.out_dir),
        )

    def test_clustering_on_two_dimensional_features(self):
        self.call('pipeline', synthetic=True, cluster_2d=True, config=self.write_config(), out_dir=str(self.out_dir))

        run = PipelineRun.objects.get()
        self.assertTrue(run.config['cluster_2d'])
        self.assertEqual(run.config['empca']['target_dim'], 2)
        self.assertIn('teacher_test_nmi', run.report)

    def test_stage_commands_use_the_configured_threads(self):
        x = np.random.default_rng(0).normal(size=(30, 2))
        input_path = self.out_dir / 'x.csv'
        save_csv(input_path, x)

        with mock.patch('apps.pipeline.management.commands.kmeans.kmeans', wraps=kmeans) as fit:
            self.call('kmeans', input=str(input_path), k=3, config=self.write_config(threads=3),
                      out_dir=str(self.out_dir))
        self.assertEqual(fit.call_args.kwargs['n_jobs'], 3)

        with mock.patch('apps.pipeline.management.commands.predict.load_model'), \
                mock.patch('apps.pipeline.management.commands.predict.TeacherPredictor') as teacher:
            teacher.return_value.predict.return_value = x
            teacher.return_value.name = 'teacher'
            self.call('predict', input=str(input_path), mbn='mbn.cmbn', pca='pca.cmbn', threads=2,
                      out_dir=str(self.out_dir))
        self.assertEqual(teacher.call_args.kwargs['n_jobs'], 2)
