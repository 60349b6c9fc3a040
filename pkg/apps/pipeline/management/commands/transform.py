from apps.core.commands import PipelineCommand
from apps.dataset.csv_io import save_int_csv
from apps.mbn.network import mbn_transform
from apps.pipeline.container import KIND_MBN, load_model
from apps.pipeline.inputs import load_matrix, resolve_config


class Command(PipelineCommand):
    help = 'Encode data with a trained MBN; writes the active unit of every clustering per row'

    def add_command_arguments(self, parser):
        parser.add_argument('--model', type=str, help='MBN container')
        parser.add_argument('--input', type=str, help='Data to encode (CSV or IDX images)')
        parser.add_argument('--has-header', action='store_true', help='Skip the first CSV line')
        parser.add_argument('--normalize', type=float, help='Divide every entry by this value')
        parser.add_argument('--limit', type=int, help='Use only the first N rows')
        parser.add_argument('--output', type=str, default='representation.csv', help='CSV file name inside --out-dir')

    def run(self, **options):
        self.require(options, 'model', 'input')
        model = load_model(options['model'], expected_kind=KIND_MBN)
        x = load_matrix(options['input'], options['has_header'], options['normalize'], options['limit'])

        representation = mbn_transform(model, x, n_jobs=resolve_config(options).threads)
        # Row-wise active columns are ordered by clustering; store each clustering's local index
        top = model.layers[-1]
        active = representation.matrix.indices.reshape(representation.rows, len(top.clusterings)) % top.k
        path = self.out_path(options, options['output'])
        save_int_csv(path, active)
        self.success(f"Encoded {x.shape[0]} rows into {representation.cols} sparse units; wrote {path}")
