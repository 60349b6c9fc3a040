import dataclasses

from apps.core.commands import PipelineCommand
from apps.dataset.csv_io import save_csv
from apps.empca.subspace import pca_project, run_empca
from apps.mbn.network import mbn_transform
from apps.pipeline.config import CLUSTERING, MODES
from apps.pipeline.container import KIND_MBN, load_model, save_model
from apps.pipeline.inputs import load_matrix, resolve_config


class Command(PipelineCommand):
    help = 'Fit EM-PCA on a matrix (or on its MBN representation) and write the embedding'

    def add_command_arguments(self, parser):
        parser.add_argument('--input', type=str, help='Data matrix (CSV or IDX images)')
        parser.add_argument('--mbn-model', type=str, help='Encode the input with this MBN first')
        parser.add_argument('--has-header', action='store_true', help='Skip the first CSV line')
        parser.add_argument('--normalize', type=float, help='Divide every entry by this value')
        parser.add_argument('--limit', type=int, help='Use only the first N rows')
        parser.add_argument('--mode', choices=MODES, default=CLUSTERING, help='Preset the EM-PCA settings come from')
        parser.add_argument('--target-dim', type=int, help='Output dimensionality')
        parser.add_argument('--max-iters', type=int, help='Maximum EM iterations')
        parser.add_argument('--tol', type=float, help='Subspace-change convergence tolerance')
        parser.add_argument('--model-out', type=str, default='pca.cmbn', help='Model file name inside --out-dir')
        parser.add_argument('--output', type=str, default='embedding.csv', help='Embedding CSV name inside --out-dir')

    def run(self, **options):
        self.require(options, 'input')
        x = load_matrix(options['input'], options['has_header'], options['normalize'], options['limit'])
        resolved = resolve_config(options, options['mode'], input_dim=x.shape[1])
        data = x
        if options['mbn_model']:
            mbn = load_model(options['mbn_model'], expected_kind=KIND_MBN)
            data = mbn_transform(mbn, x, n_jobs=resolved.threads)

        config = resolved.empca
        flags = {
            name: options[name]
            for name in ('target_dim', 'max_iters', 'tol')
            if options[name] is not None
        }
        config = dataclasses.replace(config, **flags)

        result = run_empca(data, config)
        embedding = pca_project(result.model, data)
        save_model(self.out_path(options, options['model_out']), result.model)
        save_csv(self.out_path(options, options['output']), embedding)
        save_csv(
            self.out_path(options, 'reconstruction_errors.csv'),
            [[error] for error in result.reconstruction_errors],
        )
        self.success(
            f"EM-PCA to {result.model.d_out} dims: {result.iterations} iterations "
            f"(converged={result.converged}); wrote {options['output']}"
        )
