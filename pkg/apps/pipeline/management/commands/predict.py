from apps.core.commands import PipelineCommand
from apps.core.exceptions import ArgumentError
from apps.dataset.csv_io import save_csv, save_labels_csv
from apps.dataset.matrices import LabelVector
from apps.pipeline.benchmark import StudentPredictor, TeacherPredictor
from apps.pipeline.container import KIND_KMEANS, KIND_MBN, KIND_MLP, KIND_PCA, load_model
from apps.pipeline.inputs import load_matrix, resolve_config


class Command(PipelineCommand):
    help = 'Predict with the student MLP or with the full teacher path'

    def add_command_arguments(self, parser):
        parser.add_argument('--input', type=str, help='Data to predict (CSV or IDX images)')
        parser.add_argument('--has-header', action='store_true', help='Skip the first CSV line')
        parser.add_argument('--normalize', type=float, help='Divide every entry by this value')
        parser.add_argument('--limit', type=int, help='Use only the first N rows')
        parser.add_argument('--model', type=str, help='Student MLP container')
        parser.add_argument('--argmax', action='store_true', help='Decode student indicator outputs to labels')
        parser.add_argument('--mbn', type=str, help='Teacher MBN container')
        parser.add_argument('--pca', type=str, help='Teacher EM-PCA container')
        parser.add_argument('--kmeans', type=str, help='Teacher k-means container (assign labels)')
        parser.add_argument('--output', type=str, default='predictions.csv', help='CSV file name inside --out-dir')

    def run(self, **options):
        self.require(options, 'input')
        threads = resolve_config(options).threads
        if options['model']:
            predictor = StudentPredictor(load_model(options['model'], KIND_MLP), decode=options['argmax'])
        elif options['mbn'] and options['pca']:
            kmeans = load_model(options['kmeans'], KIND_KMEANS) if options['kmeans'] else None
            predictor = TeacherPredictor(
                load_model(options['mbn'], KIND_MBN),
                load_model(options['pca'], KIND_PCA),
                kmeans,
                n_jobs=threads,
            )
        else:
            raise ArgumentError("Pass --model for the student or --mbn and --pca for the teacher")

        x = load_matrix(options['input'], options['has_header'], options['normalize'], options['limit'])
        prediction = predictor.predict(x)
        path = self.out_path(options, options['output'])
        if isinstance(prediction, LabelVector):
            save_labels_csv(path, prediction)
        else:
            save_csv(path, prediction)
        self.success(f"{predictor.name.capitalize()} predictions for {x.shape[0]} rows written to {path}")
