import json

from django.core.serializers.json import DjangoJSONEncoder

from apps.core.commands import PipelineCommand
from apps.pipeline.benchmark import StudentPredictor, TeacherPredictor, benchmark_prediction
from apps.pipeline.container import KIND_KMEANS, KIND_MBN, KIND_MLP, KIND_PCA, load_model
from apps.pipeline.inputs import load_matrix, resolve_config


class Command(PipelineCommand):
    help = 'Time teacher and student prediction on the same data and thread setting'

    def add_command_arguments(self, parser):
        parser.add_argument('--input', type=str, help='Data to predict (CSV or IDX images)')
        parser.add_argument('--has-header', action='store_true', help='Skip the first CSV line')
        parser.add_argument('--normalize', type=float, help='Divide every entry by this value')
        parser.add_argument('--limit', type=int, help='Use only the first N rows')
        parser.add_argument('--mbn', type=str, help='Teacher MBN container')
        parser.add_argument('--pca', type=str, help='Teacher EM-PCA container')
        parser.add_argument('--kmeans', type=str, help='Teacher k-means container')
        parser.add_argument('--mlp', type=str, help='Student MLP container')
        parser.add_argument('--repeats', type=int, help='Timed repeats after the warm-up pass')

    def run(self, **options):
        self.require(options, 'input', 'mbn', 'pca', 'mlp')
        x = load_matrix(options['input'], options['has_header'], options['normalize'], options['limit'])
        config = resolve_config(options, input_dim=x.shape[1])
        repeats = options['repeats'] or config.bench_repeats

        kmeans = load_model(options['kmeans'], KIND_KMEANS) if options['kmeans'] else None
        teacher = TeacherPredictor(
            load_model(options['mbn'], KIND_MBN),
            load_model(options['pca'], KIND_PCA),
            kmeans,
            n_jobs=config.threads,
        )
        student = StudentPredictor(load_model(options['mlp'], KIND_MLP), decode=kmeans is not None)

        teacher_timing = benchmark_prediction(teacher, x, repeats, threads=config.threads)
        student_timing = benchmark_prediction(student, x, repeats, threads=config.threads)
        speedup = None
        if student_timing.median > 0:
            speedup = teacher_timing.median / student_timing.median

        result = {
            'rows': x.shape[0],
            'repeats': repeats,
            'threads': config.threads,
            'teacher_timing': teacher_timing.to_dict(),
            'student_timing': student_timing.to_dict(),
            'speedup_factor': speedup,
        }
        path = self.out_path(options, 'bench.json')
        path.write_text(json.dumps(result, cls=DjangoJSONEncoder, indent=2, sort_keys=True) + '\n', encoding='utf-8')

        self.stdout.write(f"Teacher median: {teacher_timing.median:.6f}s")
        self.stdout.write(f"Student median: {student_timing.median:.6f}s")
        self.success(f"Speedup: {speedup:.1f}x" if speedup is not None else "Speedup: student time below clock resolution")
