import dataclasses

from apps.cluster_eval.kmeans import kmeans
from apps.cluster_eval.metrics import labels_to_indicators, nmi
from apps.core.commands import PipelineCommand
from apps.dataset.csv_io import save_csv, save_labels_csv
from apps.pipeline.container import save_model
from apps.pipeline.inputs import load_labels, load_matrix, resolve_config


class Command(PipelineCommand):
    help = 'Cluster a matrix with k-means and write labels (and indicator vectors)'

    def add_command_arguments(self, parser):
        parser.add_argument('--input', type=str, help='Matrix to cluster, usually an EM-PCA embedding CSV')
        parser.add_argument('--has-header', action='store_true', help='Skip the first CSV line')
        parser.add_argument('--k', type=int, help='Number of clusters')
        parser.add_argument('--restarts', type=int, help='Number of random restarts')
        parser.add_argument('--max-iters', type=int, help='Maximum Lloyd iterations per restart')
        parser.add_argument('--labels', type=str, help='Ground-truth labels; prints the NMI')
        parser.add_argument('--indicators', action='store_true', help='Also write one-hot indicator vectors')
        parser.add_argument('--model-out', type=str, default='kmeans.cmbn', help='Result file name inside --out-dir')

    def run(self, **options):
        self.require(options, 'input')
        x = load_matrix(options['input'], options['has_header'])
        truth = None
        if options['labels']:
            truth = load_labels(options['labels'], rows=x.shape[0])

        num_classes = truth.num_classes if truth is not None else None
        resolved = resolve_config(options, num_classes=num_classes)
        config = resolved.kmeans
        flags = {'k': options['k'], 'n_restarts': options['restarts'], 'max_iters': options['max_iters']}
        config = dataclasses.replace(config, **{name: value for name, value in flags.items() if value is not None})

        result = kmeans(x, config, n_jobs=resolved.threads)
        save_model(self.out_path(options, options['model_out']), result)
        save_labels_csv(self.out_path(options, 'cluster_labels.csv'), result.labels)
        if options['indicators']:
            save_csv(self.out_path(options, 'indicators.csv'), labels_to_indicators(result.labels, result.k))

        self.success(f"k-means k={result.k}: inertia {result.inertia:.6g}")
        if truth is not None:
            self.stdout.write(f"NMI against ground truth: {nmi(truth, result.labels):.4f}")
