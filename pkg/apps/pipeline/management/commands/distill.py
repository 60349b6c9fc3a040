import dataclasses

import numpy as np

from apps.cluster_eval.metrics import labels_to_indicators
from apps.core.commands import PipelineCommand
from apps.core.exceptions import ArgumentError
from apps.dataset.csv_io import load_csv, save_csv
from apps.mlp.network import LINEAR, SIGMOID, train_mlp
from apps.pipeline.config import CLUSTERING, VISUALIZATION
from apps.pipeline.container import save_model
from apps.pipeline.inputs import load_labels, load_matrix, resolve_config


class Command(PipelineCommand):
    help = 'Train the student MLP on raw input and teacher targets'

    def add_command_arguments(self, parser):
        parser.add_argument('--input', type=str, help='Raw training data (CSV or IDX images)')
        parser.add_argument('--has-header', action='store_true', help='Skip the first CSV line')
        parser.add_argument('--normalize', type=float, help='Divide every entry by this value')
        parser.add_argument('--limit', type=int, help='Use only the first N rows')
        parser.add_argument('--targets', type=str, help='Teacher embedding CSV (linear output)')
        parser.add_argument('--cluster-labels', type=str, help='Teacher cluster labels CSV (sigmoid indicator output)')
        parser.add_argument('--hidden-sizes', type=int, nargs='+', help='Hidden layer widths')
        parser.add_argument('--epochs', type=int, help='Training epochs')
        parser.add_argument('--learning-rate', type=float, help='SGD learning rate')
        parser.add_argument('--batch-size', type=int, help='Mini-batch size')
        parser.add_argument('--dropout', type=float, help='Dropout rate of the hidden layers')
        parser.add_argument('--model-out', type=str, default='mlp.cmbn', help='Model file name inside --out-dir')

    def run(self, **options):
        self.require(options, 'input')
        if bool(options['targets']) == bool(options['cluster_labels']):
            raise ArgumentError("Pass exactly one of --targets or --cluster-labels")
        x = load_matrix(options['input'], options['has_header'], options['normalize'], options['limit'])

        if options['targets']:
            mode, activation = VISUALIZATION, LINEAR
            y = load_csv(options['targets'])[:x.shape[0]]
        else:
            mode, activation = CLUSTERING, SIGMOID
            labels = load_labels(options['cluster_labels'], limit=x.shape[0])
            y = labels_to_indicators(labels, labels.num_classes)

        mlp = resolve_config(options, mode, input_dim=x.shape[1]).mlp
        hidden = tuple(options['hidden_sizes']) if options['hidden_sizes'] else mlp.layer_sizes[1:-1]
        flags = {
            'epochs': options['epochs'],
            'learning_rate': options['learning_rate'],
            'batch_size': options['batch_size'],
            'dropout_rate': options['dropout'],
        }
        mlp = dataclasses.replace(
            mlp,
            layer_sizes=(x.shape[1], *hidden, y.shape[1]),
            output_activation=activation,
            **{name: value for name, value in flags.items() if value is not None},
        )

        model, trace = train_mlp(x, y, mlp)
        save_model(self.out_path(options, options['model_out']), model)
        save_csv(self.out_path(options, 'epoch_losses.csv'), np.reshape(trace.epoch_losses, (-1, 1)))
        final = f"{trace.epoch_losses[-1]:.6g}" if trace.epoch_losses else 'n/a'
        self.success(f"Trained {list(mlp.layer_sizes)} student for {trace.epochs} epochs; final loss {final}")
