import json
from pathlib import Path

from django.core.serializers.json import DjangoJSONEncoder

from apps.core.commands import PipelineCommand
from apps.core.exceptions import ArgumentError
from apps.dataset.synthetic import make_synthetic_gaussians
from apps.pipeline.config import CLUSTERING, MODES, VISUALIZATION
from apps.pipeline.inputs import (
    config_paths,
    load_labels,
    load_matrix,
    resolve_config,
    sample_rows,
    take_rows,
)
from apps.pipeline.models import PipelineRun
from apps.pipeline.runner import run_clustering, run_repeated, run_visualization


class Command(PipelineCommand):
    help = 'Run the full teacher/student pipeline and write models, CSV outputs and a JSON report'

    def add_command_arguments(self, parser):
        parser.add_argument('--mode', choices=MODES, help='visualization or clustering (default: config file or clustering)')
        parser.add_argument('--train', type=str, help='Training data (CSV or IDX images)')
        parser.add_argument('--test', type=str, help='Test data for clustering mode')
        parser.add_argument('--train-labels', type=str, help='Ground-truth training labels (scoring only)')
        parser.add_argument('--test-labels', type=str, help='Ground-truth test labels (scoring only)')
        parser.add_argument('--has-header', action='store_true', help='Skip the first CSV line')
        parser.add_argument('--normalize', type=float, help='Divide every entry by this value')
        parser.add_argument('--limit', type=int, help='Use only the first N rows of each file')
        parser.add_argument(
            '--sample', type=int,
            help='Train on N rows drawn at random from the training file (seeded by --seed)',
        )
        parser.add_argument(
            '--cluster-2d', action='store_true',
            help='Clustering mode: cluster the two-dimensional visualization features',
        )
        parser.add_argument('--runs', type=int, default=1, help='Repeat clustering over consecutive seeds')
        parser.add_argument(
            '--synthetic',
            action='store_true',
            help='Use 3-class Gaussian data (200 train / 100 test rows per class) instead of files',
        )

    def _load(self, options, mode, seed):
        if options['synthetic']:
            x_train, labels_train = make_synthetic_gaussians(seed, 200, 3, 10, 10.0)
            x_test, labels_test = make_synthetic_gaussians(seed + 1, 100, 3, 10, 10.0)
            return x_train, x_test, labels_train, labels_test

        paths = dict(config_paths(options))
        for name in ('train', 'test', 'train_labels', 'test_labels'):
            if options[name]:
                paths[name] = options[name]
        if not paths.get('train'):
            raise ArgumentError("Pass --train (or paths.train in --config) or --synthetic")
        if mode == CLUSTERING and not paths.get('test'):
            raise ArgumentError("Clustering mode needs --test (or paths.test in --config)")

        load = dict(has_header=options['has_header'], limit=options['limit'])
        x_train = load_matrix(paths['train'], divisor=options['normalize'], **load)
        labels_train = None
        if paths.get('train_labels'):
            labels_train = load_labels(paths['train_labels'], rows=x_train.shape[0], **load)
        x_test = labels_test = None
        if mode == CLUSTERING:
            x_test = load_matrix(paths['test'], divisor=options['normalize'], **load)
            if paths.get('test_labels'):
                labels_test = load_labels(paths['test_labels'], rows=x_test.shape[0], **load)
        return x_train, x_test, labels_train, labels_test

    def run(self, **options):
        # Mode from the flag, else the config file, else clustering
        base = resolve_config(options)
        mode = options['mode'] or base.mode
        x_train, x_test, labels_train, labels_test = self._load(options, mode, base.seed)
        if options['sample'] is not None:
            rows = sample_rows(x_train.shape[0], options['sample'], base.seed)
            x_train, labels_train = take_rows(x_train, labels_train, rows)
        num_classes = labels_train.num_classes if labels_train is not None else None
        config = resolve_config(options, mode, input_dim=x_train.shape[1], num_classes=num_classes)
        if options['runs'] < 1:
            raise ArgumentError(f"--runs must be at least 1, got {options['runs']}")
        if mode == VISUALIZATION and options['runs'] != 1:
            raise ArgumentError("--runs applies to clustering mode only")

        out_dir = Path(options['out_dir'])
        record = PipelineRun.objects.create(
            mode=mode, seed=config.seed, config=config.to_dict(), out_dir=str(out_dir)
        )
        record.transition_to(PipelineRun.Status.RUNNING)
        try:
            if mode == VISUALIZATION:
                result = run_visualization(x_train, config, labels=labels_train, out_dir=out_dir)
                report = result.report
            elif options['runs'] > 1:
                reports, summary = run_repeated(
                    x_train, x_test, config, options['runs'],
                    labels_train=labels_train, labels_test=labels_test, out_dir=out_dir,
                )
                report = reports[-1]
                summary_path = out_dir / 'summary.json'
                summary_path.write_text(
                    json.dumps(summary.to_dict(), cls=DjangoJSONEncoder, indent=2, sort_keys=True) + '\n',
                    encoding='utf-8',
                )
                self._print_summary(summary)
            else:
                report = run_clustering(
                    x_train, x_test, config,
                    labels_train=labels_train, labels_test=labels_test, out_dir=out_dir,
                ).report
        except Exception as exc:
            record.transition_to(PipelineRun.Status.FAILED, str(exc))
            raise

        record.record_report(report)
        self._print_report(report)
        self.success(f"Pipeline run {record.pk} completed; outputs in {out_dir}")

    def _print_report(self, report):
        for name, value in sorted(report.nmi_fields().items()):
            if value is not None:
                self.stdout.write(f"{name}: {value:.4f}")
        if report.embedding_alignment_error is not None:
            self.stdout.write(f"embedding_alignment_error: {report.embedding_alignment_error:.4f}")
        self.stdout.write(f"teacher_predict_seconds: {report.teacher_predict_seconds:.6f}")
        self.stdout.write(f"student_predict_seconds: {report.student_predict_seconds:.6f}")
        if report.speedup_factor is not None:
            self.stdout.write(f"speedup_factor: {report.speedup_factor:.1f}")

    def _print_summary(self, summary):
        self.stdout.write(f"Summary over {summary.n_runs} runs (seeds {summary.seeds}):")
        for name, stats in sorted(summary.nmi.items()):
            self.stdout.write(
                f"  {name}: mean {stats['mean']:.4f} std {stats['std']:.4f} max {stats['max']:.4f}"
            )
