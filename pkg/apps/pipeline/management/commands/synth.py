from apps.core.commands import PipelineCommand
from apps.dataset.csv_io import save_csv, save_labels_csv
from apps.dataset.synthetic import make_synthetic_gaussians


class Command(PipelineCommand):
    help = 'Write Gaussian-mixture train/test CSV files with their class labels'

    def add_command_arguments(self, parser):
        parser.add_argument('--n-per-class', type=int, default=200, help='Training rows per class')
        parser.add_argument('--test-per-class', type=int, default=0, help='Test rows per class (0 for none)')
        parser.add_argument('--classes', type=int, default=3, help='Number of classes')
        parser.add_argument('--dim', type=int, default=10, help='Number of features')
        parser.add_argument('--separation', type=float, default=10.0, help='Distance of class means from the origin')

    def run(self, **options):
        seed = options['seed'] or 0
        x, labels = make_synthetic_gaussians(
            seed, options['n_per_class'], options['classes'], options['dim'], options['separation']
        )
        save_csv(self.out_path(options, 'train.csv'), x)
        save_labels_csv(self.out_path(options, 'train_labels.csv'), labels)
        self.success(f"Wrote {x.shape[0]}x{x.shape[1]} training data to {options['out_dir']}")

        if options['test_per_class'] > 0:
            x_test, labels_test = make_synthetic_gaussians(
                seed + 1, options['test_per_class'], options['classes'], options['dim'], options['separation']
            )
            save_csv(self.out_path(options, 'test.csv'), x_test)
            save_labels_csv(self.out_path(options, 'test_labels.csv'), labels_test)
            self.success(f"Wrote {x_test.shape[0]}x{x_test.shape[1]} test data to {options['out_dir']}")
