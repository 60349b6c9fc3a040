import dataclasses
import json
import tempfile
from contextlib import contextmanager
from pathlib import Path
from unittest import mock

import numpy as np
from django.test import SimpleTestCase, TestCase
from threadpoolctl import threadpool_info

from apps.core.exceptions import (
    ArgumentError,
    DimensionMismatchError,
    FormatError,
    LengthMismatchError,
    StageError,
)
from apps.dataset.idx import save_idx
from apps.dataset.matrices import LabelVector
from apps.mlp.network import LINEAR, SIGMOID, MlpConfig, init_mlp
from .benchmark import StudentPredictor, benchmark_prediction
from .config import (
    CLUSTERING,
    VISUALIZATION,
    PipelineConfig,
    build_pipeline_config,
    read_config_file,
)
from .inputs import load_labels, load_matrix, sample_rows, take_rows
from .models import PipelineRun, RunStatusManager
from .report import RunReport, Timing, summarize_runs
from .runner import embedding_alignment_error, score_predictions, time_predictors


def make_report(**overrides):
    fields = {
        'mode': CLUSTERING,
        'seed': 0,
        'threads': 1,
        'n_train': 600,
        'n_test': 300,
        'teacher_timing': Timing.from_samples([2.0, 1.5, 2.5]),
        'student_timing': Timing.from_samples([0.5]),
        'config': {'mode': CLUSTERING},
        'started_at': '2026-01-01T00:00:00+00:00',
        'finished_at': '2026-01-01T00:01:00+00:00',
    }
    fields.update(overrides)
    return RunReport(**fields)


class PipelineConfigTests(SimpleTestCase):
    """Preset, config-file and flag resolution"""

    def test_desk_clustering_defaults(self):
        config = build_pipeline_config()

        self.assertEqual(config.mode, CLUSTERING)
        self.assertFalse(config.long_run)
        self.assertEqual(config.mbn.k_schedule, (256, 128, 64, 32, 16))
        self.assertEqual(config.mbn.clusterings_per_layer, 100)
        self.assertEqual(config.empca.target_dim, 5)
        self.assertEqual(config.kmeans.k, 10)
        self.assertEqual(config.mlp.layer_sizes, (784, 256, 256, 10))
        self.assertEqual(config.mlp.output_activation, SIGMOID)

    def test_visualization_maps_to_two_dimensions(self):
        config = build_pipeline_config(mode=VISUALIZATION, input_dim=10)

        self.assertEqual(config.empca.target_dim, 2)
        self.assertEqual(config.mlp.layer_sizes, (10, 256, 256, 2))
        self.assertEqual(config.mlp.output_activation, LINEAR)
        self.assertEqual(config.mlp.epochs, 120)

    def test_long_run_uses_the_full_scale_settings(self):
        config = build_pipeline_config(mode=VISUALIZATION, long_run=True)

        self.assertTrue(config.long_run)
        self.assertEqual(config.mbn.k_schedule, (4000, 2000, 1000, 500, 250, 125, 65, 30, 15))
        self.assertEqual(config.mbn.clusterings_per_layer, 400)
        self.assertEqual(config.mbn.reconstruction_rate, 0.5)
        self.assertEqual(config.mlp.layer_sizes, (784, 2048, 2048, 2))

    def test_class_count_sets_k_unless_pinned(self):
        self.assertEqual(build_pipeline_config(input_dim=10, num_classes=3).mlp.output_size, 3)
        pinned = build_pipeline_config(overrides={'kmeans': {'k': 4}}, input_dim=10, num_classes=3)
        self.assertEqual(pinned.kmeans.k, 4)
        self.assertEqual(pinned.mlp.output_size, 4)

    def test_flags_win_over_the_config_file(self):
        overrides = {'seed': 7, 'threads': 2, 'mlp': {'epochs': 3}}
        self.assertEqual(build_pipeline_config(overrides=overrides).seed, 7)
        config = build_pipeline_config(overrides=overrides, seed=11, threads=4)
        self.assertEqual((config.seed, config.threads, config.mlp.epochs), (11, 4, 3))

    def test_stage_seeds_derive_from_the_run_seed(self):
        config = build_pipeline_config(seed=10)
        self.assertEqual(
            (config.mbn.seed, config.empca.seed, config.kmeans.seed, config.mlp.seed), (10, 11, 12, 13)
        )
        reseeded = config.with_seed(20)
        self.assertEqual((reseeded.seed, reseeded.mlp.seed), (20, 23))

    def test_unknown_keys_are_rejected(self):
        for overrides in ({'bogus': 1}, {'mbn': {'depth': 3}}, {'paths': {'cache': 'x'}}):
            with self.assertRaises(ArgumentError):
                build_pipeline_config(overrides=overrides)

    def test_mode_consistency(self):
        config = build_pipeline_config(mode=VISUALIZATION, input_dim=10)
        with self.assertRaises(ArgumentError):
            dataclasses.replace(config, mlp=dataclasses.replace(config.mlp, output_activation=SIGMOID))
        with self.assertRaises(ArgumentError):
            dataclasses.replace(config, mlp=MlpConfig((10, 3), LINEAR))

        clustering = build_pipeline_config(input_dim=10, num_classes=3)
        with self.assertRaises(ArgumentError):
            dataclasses.replace(clustering, kmeans=None)
        with self.assertRaises(ArgumentError):
            dataclasses.replace(clustering, mlp=MlpConfig((10, 4), SIGMOID))

    def test_dict_round_trip(self):
        config = build_pipeline_config(mode=VISUALIZATION, input_dim=10, seed=3)
        self.assertEqual(PipelineConfig.from_dict(json.loads(json.dumps(config.to_dict()))), config)

    def test_with_input_dim(self):
        config = build_pipeline_config().with_input_dim(12)
        self.assertEqual(config.input_dim, 12)
        self.assertEqual(config.mlp.layer_sizes[1:], (256, 256, 10))

    def test_two_dimensional_clustering_variant(self):
        desk = build_pipeline_config(input_dim=10, num_classes=3, cluster_2d=True)
        self.assertTrue(desk.cluster_2d)
        self.assertEqual(desk.empca.target_dim, 2)
        self.assertEqual(desk.mbn.reconstruction_rate, 0.0)
        self.assertEqual(desk.mlp.layer_sizes, (10, 256, 256, 3))
        self.assertEqual(desk.mlp.output_activation, SIGMOID)

        full = build_pipeline_config(long_run=True, cluster_2d=True)
        self.assertEqual(full.empca.target_dim, 2)
        self.assertEqual(full.mbn.reconstruction_rate, 0.5)
        self.assertEqual(full.mbn.clusterings_per_layer, 400)
        self.assertEqual(full.mlp.layer_sizes, (784, 2048, 2048, 10))

        self.assertEqual(build_pipeline_config(overrides={'cluster_2d': True}).empca.target_dim, 2)
        self.assertEqual(build_pipeline_config(long_run=True).empca.target_dim, 5)
        with self.assertRaises(ArgumentError):
            build_pipeline_config(mode=VISUALIZATION, cluster_2d=True)

    def test_config_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'run.json'
            path.write_text(json.dumps({'mode': VISUALIZATION, 'empca': {'max_iters': 5}}))
            self.assertEqual(read_config_file(path)['empca'], {'max_iters': 5})

            path.write_text('{"mbn": ')
            with self.assertRaises(ArgumentError):
                read_config_file(path)
            with self.assertRaises(ArgumentError):
                read_config_file(Path(tmp) / 'missing.json')


class RunReportTests(SimpleTestCase):

    def test_speedup_is_the_median_ratio(self):
        report = make_report()
        self.assertEqual(report.teacher_predict_seconds, 2.0)
        self.assertEqual(report.student_predict_seconds, 0.5)
        self.assertEqual(report.speedup_factor, 4.0)

    def test_zero_student_time_has_no_speedup(self):
        self.assertIsNone(make_report(student_timing=Timing.from_samples([0.0])).speedup_factor)

    def test_json_round_trip(self):
        report = make_report(
            teacher_test_nmi=0.93, student_test_nmi=0.91, student_epoch_losses=[0.5, 0.25],
            artifacts={'mlp': '/tmp/mlp.cmbn'},
        )
        self.assertEqual(RunReport.from_json(report.to_json()), report)

    def test_missing_nmis_are_omitted(self):
        data = make_report(teacher_test_nmi=0.9).to_dict()
        self.assertIn('teacher_test_nmi', data)
        self.assertNotIn('student_test_nmi', data)
        self.assertEqual(data['speedup_factor'], 4.0)

    def test_write_and_read(self):
        report = make_report(mode=VISUALIZATION, embedding_alignment_error=0.05)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'report.json'
            report.write(path)
            self.assertEqual(RunReport.read(path), report)

    def test_malformed_reports(self):
        data = make_report().to_dict()
        del data['seed']
        with self.assertRaises(FormatError):
            RunReport.from_dict(data)
        with self.assertRaises(FormatError):
            RunReport.from_json('not json')

    def test_timing_order_statistics(self):
        timing = Timing.from_samples([0.3])
        self.assertEqual((timing.median, timing.min, timing.max), (0.3, 0.3, 0.3))
        with self.assertRaises(ArgumentError):
            Timing(median=1.0, min=2.0, max=3.0)
        with self.assertRaises(ArgumentError):
            Timing(median=-1.0, min=-1.0, max=0.0)
        with self.assertRaises(ArgumentError):
            Timing.from_samples([])

    def test_summary_over_runs(self):
        summary = summarize_runs([
            make_report(seed=0, teacher_test_nmi=0.8),
            make_report(seed=1, teacher_test_nmi=0.9),
        ])
        self.assertEqual(summary.n_runs, 2)
        self.assertEqual(summary.seeds, [0, 1])
        stats = summary.nmi['teacher_test_nmi']
        self.assertAlmostEqual(stats['mean'], 0.85)
        self.assertAlmostEqual(stats['std'], 0.05)
        self.assertEqual(stats['max'], 0.9)
        self.assertNotIn('student_test_nmi', summary.nmi)
        self.assertEqual(summary.mean_speedup, 4.0)
        with self.assertRaises(ArgumentError):
            summarize_runs([])


class BenchmarkTests(SimpleTestCase):

    def setUp(self):
        self.model = init_mlp(MlpConfig((4, 8, 3), SIGMOID), np.random.default_rng(0))
        self.x = np.random.default_rng(1).normal(size=(20, 4))

    def test_repeats_are_timed_after_a_warm_up(self):
        ticks = iter([0.0, 1.0, 1.0, 3.0, 3.0, 6.0])
        timing = benchmark_prediction(self.model, self.x, 3, clock=lambda: next(ticks))
        self.assertEqual(timing.samples, [1.0, 2.0, 3.0])
        self.assertEqual((timing.median, timing.min, timing.max), (2.0, 1.0, 3.0))

    def test_single_repeat(self):
        timing = benchmark_prediction(StudentPredictor(self.model, decode=True), self.x, 1)
        self.assertEqual(timing.median, timing.min)
        self.assertEqual(timing.median, timing.max)
        self.assertGreaterEqual(timing.min, 0.0)

    def test_decoded_student_predicts_labels(self):
        labels = StudentPredictor(self.model, decode=True).predict(self.x)
        self.assertEqual(len(labels), 20)
        self.assertEqual(labels.num_classes, 3)

    def test_repeats_must_be_positive(self):
        with self.assertRaises(ArgumentError):
            benchmark_prediction(self.model, self.x, 0)

    def test_threads_must_be_positive(self):
        with self.assertRaises(ArgumentError):
            benchmark_prediction(self.model, self.x, 1, threads=0)


class PoolRecorder:
    """Predictor that records the native thread pools it runs under"""

    name = 'recorder'

    def __init__(self):
        self.pools = []

    def predict(self, x):
        self.pools.append([pool['num_threads'] for pool in threadpool_info()])
        return x


class BenchmarkThreadLimitTests(SimpleTestCase):
    """Both predictors are timed under the configured thread cap"""

    def setUp(self):
        self.x = np.random.default_rng(3).normal(size=(10, 4))

    def test_native_pools_are_capped_while_timing(self):
        recorder = PoolRecorder()
        timing = benchmark_prediction(recorder, self.x, 2, threads=1)

        self.assertEqual(len(recorder.pools), 3)
        for pools in recorder.pools:
            self.assertTrue(all(count == 1 for count in pools), pools)
        self.assertEqual(timing.threads, 1)

    def test_teacher_and_student_share_the_limit(self):
        active = []

        @contextmanager
        def fake_limits(limits):
            active.append(limits)
            yield
            active.pop()

        class Recorder:
            def __init__(self):
                self.seen = []

            def predict(self, x):
                self.seen.append(list(active))
                return x

        teacher, student = Recorder(), Recorder()
        with mock.patch('apps.pipeline.benchmark.threadpool_limits', fake_limits):
            teacher_timing, student_timing = time_predictors(teacher, student, self.x, 2, threads=3)

        self.assertEqual(teacher.seen, [[3]] * 3)
        self.assertEqual(student.seen, [[3]] * 3)
        self.assertEqual((teacher_timing.threads, student_timing.threads), (3, 3))
        self.assertEqual(active, [])


class EvaluationTests(SimpleTestCase):

    def test_alignment_of_an_affine_copy_is_zero(self):
        rng = np.random.default_rng(0)
        teacher = rng.normal(size=(50, 2))
        student = teacher @ np.array([[2.0, 1.0], [-0.5, 3.0]]) + np.array([4.0, -1.0])
        self.assertLess(embedding_alignment_error(student, teacher), 1e-10)

    def test_alignment_of_unrelated_embeddings(self):
        rng = np.random.default_rng(1)
        error = embedding_alignment_error(rng.normal(size=(500, 2)), rng.normal(size=(500, 2)))
        self.assertGreater(error, 0.9)

    def test_alignment_row_mismatch(self):
        with self.assertRaises(DimensionMismatchError):
            embedding_alignment_error(np.zeros((3, 2)), np.zeros((4, 2)))

    def test_constant_teacher_embedding(self):
        self.assertEqual(embedding_alignment_error(np.ones((4, 2)), np.ones((4, 2))), 0.0)

    def test_scores_follow_the_split_suffix(self):
        with self.assertLogs('compressive_mbn.pipeline', level='INFO'):
            scores = score_predictions([0, 0, 1, 1], None, {
                'teacher_train': [1, 1, 0, 0],
                'teacher_test': [0, 1],
            })
        self.assertAlmostEqual(scores['teacher_train_nmi'], 1.0)
        self.assertIsNone(scores['teacher_test_nmi'])

    def test_score_length_mismatch_names_the_stage(self):
        with self.assertLogs('compressive_mbn.pipeline', level='INFO'):
            with self.assertRaises(StageError) as ctx:
                score_predictions([0, 1], None, {'student_train': [0, 1, 1]})
        self.assertEqual(ctx.exception.stage, 'evaluate')


class InputLoadingTests(SimpleTestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def test_csv_is_only_scaled_on_request(self):
        path = self.tmp / 'x.csv'
        path.write_text("255,51\n0,102\n")
        np.testing.assert_array_equal(load_matrix(path), [[255.0, 51.0], [0.0, 102.0]])
        np.testing.assert_allclose(load_matrix(path, divisor=255.0, limit=1), [[1.0, 0.2]])

    def test_label_count_must_match_the_rows(self):
        path = self.tmp / 'labels.csv'
        path.write_text("0\n1\n2\n")
        self.assertEqual(len(load_labels(path, rows=3)), 3)
        with self.assertRaises(LengthMismatchError):
            load_labels(path, rows=4)

    def test_idx_images_are_scaled_by_255(self):
        path = self.tmp / 'images.idx'
        save_idx(path, np.array([[255.0, 0.0, 51.0, 102.0], [0.0, 0.0, 0.0, 255.0]]))
        np.testing.assert_allclose(load_matrix(path, limit=1), [[1.0, 0.0, 0.2, 0.4]])
        with self.assertRaises(FormatError):
            labels_path = self.tmp / 'labels.idx'
            save_idx(labels_path, LabelVector.from_values([0, 1]))
            load_matrix(labels_path)

    def test_random_rows_are_seeded_and_distinct(self):
        rows = sample_rows(100, 10, seed=4)
        self.assertEqual(len(set(rows.tolist())), 10)
        self.assertEqual(rows.tolist(), sorted(rows.tolist()))
        np.testing.assert_array_equal(rows, sample_rows(100, 10, seed=4))
        self.assertFalse(np.array_equal(rows, sample_rows(100, 10, seed=5)))
        self.assertNotEqual(rows.tolist(), list(range(10)))
        for size in (0, 101):
            with self.assertRaises(ArgumentError):
                sample_rows(100, size, seed=0)

    def test_sampled_rows_keep_their_labels(self):
        x = np.arange(12, dtype=np.float64).reshape(6, 2)
        labels = LabelVector.from_values([0, 1, 2, 0, 1, 2])
        rows = sample_rows(6, 3, seed=1)

        subset, subset_labels = take_rows(x, labels, rows)

        np.testing.assert_array_equal(subset[:, 0] / 2, rows)
        self.assertEqual(subset_labels.labels.tolist(), (rows % 3).tolist())
        self.assertEqual(subset_labels.num_classes, 3)
        self.assertIsNone(take_rows(x, None, rows)[1])


class PipelineRunTests(TestCase):
    """Run history records"""

    def setUp(self):
        self.run = PipelineRun.objects.create(mode=PipelineRun.Mode.CLUSTERING, seed=4)

    def test_starts_pending(self):
        self.assertEqual(self.run.status, PipelineRun.Status.PENDING)
        self.assertIsNone(self.run.duration)

    def test_successful_run(self):
        self.run.transition_to(PipelineRun.Status.RUNNING)
        self.assertIsNotNone(self.run.started_at)

        self.run.record_report(make_report(teacher_test_nmi=0.95))
        self.run.refresh_from_db()

        self.assertEqual(self.run.status, PipelineRun.Status.COMPLETED)
        self.assertEqual(self.run.report['teacher_test_nmi'], 0.95)
        self.assertIsNotNone(self.run.duration)

    def test_failed_run_can_be_retried(self):
        self.run.transition_to(PipelineRun.Status.RUNNING)
        self.run.transition_to(PipelineRun.Status.FAILED, 'Training diverged at epoch 2')
        self.assertEqual(self.run.error_message, 'Training diverged at epoch 2')

        self.run.transition_to(PipelineRun.Status.PENDING)
        self.assertEqual(self.run.error_message, '')
        self.assertIsNone(self.run.started_at)

    def test_invalid_transitions(self):
        with self.assertRaises(ArgumentError):
            self.run.transition_to(PipelineRun.Status.COMPLETED)
        self.assertFalse(self.run.can_transition_to(PipelineRun.Status.FAILED))
        self.assertTrue(self.run.can_transition_to(PipelineRun.Status.RUNNING))

    def test_status_manager(self):
        manager = RunStatusManager()
        self.assertEqual(manager.get_next_allowed_statuses('running'), ['completed', 'failed'])
        self.assertIsNone(manager.validate_transition('failed', 'pending'))
        self.assertIn("Cannot transition", manager.validate_transition('completed', 'running'))
