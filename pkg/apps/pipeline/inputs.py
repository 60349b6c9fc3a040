# apps/pipeline/inputs.py
"""
Input resolution shared by the management commands: file loading with
one-time normalization, and the preset/config-file/flag merge.
"""

import logging
from pathlib import Path

import numpy as np

from apps.core.exceptions import ArgumentError, FormatError, LengthMismatchError
from apps.dataset.csv_io import load_csv, load_labels_csv
from apps.dataset.idx import load_idx, load_mnist
from apps.dataset.matrices import LabelVector, normalize_scale
from .config import build_pipeline_config, read_config_file

logger = logging.getLogger('compressive_mbn.pipeline')


def is_csv(path):
    return Path(path).suffix.lower() == '.csv'


def load_matrix(path, has_header=False, divisor=None, limit=None):
    """
    Load a CSV or IDX image file. IDX pixels are divided by `divisor`;
    CSV values only when a divisor is given explicitly.
    """
    if is_csv(path):
        x = load_csv(path, has_header=has_header)
        if divisor is not None:
            x = normalize_scale(x, divisor)
        if limit is not None:
            x = x[:limit]
    else:
        x, _ = load_mnist(path, limit=limit, divisor=255.0 if divisor is None else divisor)
    logger.info(f"Loaded {x.shape[0]}x{x.shape[1]} input from {path}")
    return x


def load_labels(path, rows=None, has_header=False, limit=None):
    """Load a label CSV or IDX label file, checking it has one label per input row"""
    if is_csv(path):
        labels = load_labels_csv(path, has_header=has_header)
    else:
        labels = load_idx(path)
        if not isinstance(labels, LabelVector):
            raise FormatError(f"{path}: expected a label file, found images")
    if limit is not None:
        labels = LabelVector(labels=labels.labels[:limit], num_classes=labels.num_classes)
    if rows is not None and len(labels) != rows:
        raise LengthMismatchError(f"{path}: {len(labels)} labels for {rows} input rows")
    return labels


def resolve_config(options, mode=None, input_dim=784, num_classes=None):
    """PipelineConfig from --config, --long-run, --seed and --threads"""
    overrides = read_config_file(options['config']) if options.get('config') else {}
    return build_pipeline_config(
        mode=mode,
        overrides=overrides,
        long_run=options.get('long_run', False),
        seed=options.get('seed'),
        threads=options.get('threads'),
        input_dim=input_dim,
        num_classes=num_classes,
        cluster_2d=options.get('cluster_2d') or None,
    )


def config_paths(options):
    """The 'paths' section of the --config file, or an empty dict"""
    if not options.get('config'):
        return {}
    return read_config_file(options['config']).get('paths') or {}


def sample_rows(total, size, seed):
    """Sorted indices of `size` distinct rows out of `total`, drawn from a seeded generator"""
    if not 1 <= size <= total:
        raise ArgumentError(f"cannot sample {size} rows from {total}")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(total, size=size, replace=False))


def take_rows(x, labels, rows):
    """The selected rows of x and, when given, the matching labels"""
    if labels is not None:
        labels = LabelVector(labels=labels.labels[rows], num_classes=labels.num_classes)
    return x[rows], labels
