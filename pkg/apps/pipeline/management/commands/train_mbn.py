from apps.core.commands import PipelineCommand
from apps.mbn.network import train_mbn
from apps.pipeline.config import CLUSTERING, MODES
from apps.pipeline.container import save_model
from apps.pipeline.inputs import load_matrix, resolve_config


class Command(PipelineCommand):
    help = 'Train a multilayer bootstrap network and save it as a CMBN container'

    def add_command_arguments(self, parser):
        parser.add_argument('--input', type=str, help='Training data (CSV or IDX images)')
        parser.add_argument('--has-header', action='store_true', help='Skip the first CSV line')
        parser.add_argument('--normalize', type=float, help='Divide every entry by this value')
        parser.add_argument('--limit', type=int, help='Use only the first N rows')
        parser.add_argument('--mode', choices=MODES, default=CLUSTERING, help='Preset the MBN settings come from')
        parser.add_argument('--model-out', type=str, default='mbn.cmbn', help='Model file name inside --out-dir')

    def run(self, **options):
        self.require(options, 'input')
        x = load_matrix(options['input'], options['has_header'], options['normalize'], options['limit'])
        config = resolve_config(options, options['mode'], input_dim=x.shape[1])

        model = train_mbn(x, config.mbn, n_jobs=config.threads)
        path = self.out_path(options, options['model_out'])
        save_model(path, model)
        self.success(
            f"Trained {len(model.layers)}-layer MBN on {x.shape[0]} rows "
            f"(output widths {model.output_dims}); saved to {path}"
        )
