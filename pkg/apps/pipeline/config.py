# apps/pipeline/config.py
"""
Pipeline configuration.

A PipelineConfig starts from a preset in settings.COMPRESSIVE_MBN (DESK or,
with --long-run, FULL), then layers the declarative JSON config file and the
command-line flags on top.

Clustering mode with cluster_2d (or --cluster-2d) clusters the two-dimensional
visualization features instead of the default embedding.

Config file schema (every key optional):

    {
      "mode": "visualization" | "clustering",
      "cluster_2d": false,
      "seed": 0,
      "threads": 1,
      "bench_repeats": 5,
      "normalize_divisor": 255.0,
      "mbn": {"k_schedule": [...], "clusterings_per_layer": 100,
              "feature_fraction": 0.5, "reconstruction_rate": 0.0},
      "empca": {"target_dim": 5, "max_iters": 200, "tol": 1e-7},
      "kmeans": {"k": 10, "n_restarts": 10, "max_iters": 300},
      "mlp": {"hidden_sizes": [256, 256], "dropout_rate": 0.2,
              "learning_rate": 0.01, "batch_size": 32, "epochs": 50},
      "paths": {"train": "...", "test": "...", "train_labels": "...",
                "test_labels": "...", "out_dir": "..."}
    }
"""

import copy
import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

from django.conf import settings

from apps.cluster_eval.kmeans import KmeansConfig
from apps.core.exceptions import ArgumentError
from apps.empca.subspace import EmpcaConfig
from apps.mbn.network import MbnConfig
from apps.mlp.network import LINEAR, SIGMOID, MlpConfig

VISUALIZATION = 'visualization'
CLUSTERING = 'clustering'
MODES = (VISUALIZATION, CLUSTERING)

MNIST_INPUT_DIM = 784

TOP_LEVEL_KEYS = {
    'mode', 'cluster_2d', 'seed', 'threads', 'bench_repeats', 'normalize_divisor',
    'mbn', 'empca', 'kmeans', 'mlp', 'paths',
}
SECTION_KEYS = {
    'mbn': {'k_schedule', 'clusterings_per_layer', 'feature_fraction', 'reconstruction_rate'},
    'empca': {'target_dim', 'max_iters', 'tol'},
    'kmeans': {'k', 'n_restarts', 'max_iters'},
    'mlp': {'hidden_sizes', 'dropout_rate', 'learning_rate', 'batch_size', 'epochs'},
    'paths': {'train', 'test', 'train_labels', 'test_labels', 'out_dir'},
}

# Each stage gets its own seed derived from the run seed
SEED_OFFSETS = {'mbn': 0, 'empca': 1, 'kmeans': 2, 'mlp': 3}


@dataclass(frozen=True)
class PipelineConfig:
    mode: str
    mbn: MbnConfig
    empca: EmpcaConfig
    mlp: MlpConfig
    kmeans: Optional[KmeansConfig] = None
    paths: Dict[str, str] = field(default_factory=dict)
    bench_repeats: int = 5
    threads: int = 1
    seed: int = 0
    normalize_divisor: float = 255.0
    long_run: bool = False
    cluster_2d: bool = False

    def __post_init__(self):
        self.validate()

    def validate(self):
        """Check the mode-consistency invariants between the stage configs"""
        if self.mode not in MODES:
            raise ArgumentError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.bench_repeats < 1:
            raise ArgumentError(f"bench_repeats must be at least 1, got {self.bench_repeats}")
        if self.threads < 1:
            raise ArgumentError(f"threads must be at least 1, got {self.threads}")
        if not self.normalize_divisor > 0:
            raise ArgumentError(f"normalize_divisor must be positive, got {self.normalize_divisor}")
        if self.cluster_2d and self.mode != CLUSTERING:
            raise ArgumentError("cluster_2d applies to clustering mode only")

        if self.mode == VISUALIZATION:
            if self.mlp.output_activation != LINEAR:
                raise ArgumentError("visualization mode needs a linear MLP output")
            if self.mlp.output_size != self.empca.target_dim:
                raise ArgumentError(
                    f"visualization MLP output {self.mlp.output_size} must equal "
                    f"EM-PCA target_dim {self.empca.target_dim}"
                )
        else:
            if self.kmeans is None:
                raise ArgumentError("clustering mode needs a k-means config")
            if self.mlp.output_activation != SIGMOID:
                raise ArgumentError("clustering mode needs a sigmoid MLP output")
            if self.mlp.output_size != self.kmeans.k:
                raise ArgumentError(
                    f"clustering MLP output {self.mlp.output_size} must equal k-means k {self.kmeans.k}"
                )

    @property
    def input_dim(self):
        return self.mlp.input_size

    def with_input_dim(self, input_dim):
        """Same config with the student's input layer sized for the data"""
        sizes = (int(input_dim),) + self.mlp.layer_sizes[1:]
        return dataclasses.replace(self, mlp=dataclasses.replace(self.mlp, layer_sizes=sizes))

    def with_seed(self, seed):
        """Same config with every stage reseeded from a new run seed"""
        return dataclasses.replace(
            self,
            seed=seed,
            mbn=dataclasses.replace(self.mbn, seed=seed + SEED_OFFSETS['mbn']),
            empca=dataclasses.replace(self.empca, seed=seed + SEED_OFFSETS['empca']),
            kmeans=None if self.kmeans is None else dataclasses.replace(
                self.kmeans, seed=seed + SEED_OFFSETS['kmeans']
            ),
            mlp=dataclasses.replace(self.mlp, seed=seed + SEED_OFFSETS['mlp']),
        )

    def to_dict(self):
        return {
            'mode': self.mode,
            'mbn': self.mbn.to_dict(),
            'empca': self.empca.to_dict(),
            'kmeans': None if self.kmeans is None else self.kmeans.to_dict(),
            'mlp': self.mlp.to_dict(),
            'paths': dict(self.paths),
            'bench_repeats': self.bench_repeats,
            'threads': self.threads,
            'seed': self.seed,
            'normalize_divisor': self.normalize_divisor,
            'long_run': self.long_run,
            'cluster_2d': self.cluster_2d,
        }

    @classmethod
    def from_dict(cls, data):
        """Inverse of to_dict (config echo in reports and containers)"""
        kmeans = data.get('kmeans')
        return cls(
            mode=data['mode'],
            mbn=MbnConfig.from_dict(data['mbn']),
            empca=EmpcaConfig.from_dict(data['empca']),
            kmeans=None if kmeans is None else KmeansConfig.from_dict(kmeans),
            mlp=MlpConfig.from_dict(data['mlp']),
            paths=dict(data.get('paths', {})),
            bench_repeats=data.get('bench_repeats', 5),
            threads=data.get('threads', 1),
            seed=data.get('seed', 0),
            normalize_divisor=data.get('normalize_divisor', 255.0),
            long_run=data.get('long_run', False),
            cluster_2d=data.get('cluster_2d', False),
        )


def _check_keys(data, allowed, where):
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ArgumentError(f"Unknown config key(s) in {where}: {', '.join(unknown)}")


def _merge(base, overrides):
    merged = copy.deepcopy(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def read_config_file(path):
    """Parse and key-check a JSON config file"""
    try:
        data = json.loads(Path(path).read_text(encoding='utf-8'))
    except (OSError, ValueError) as exc:
        raise ArgumentError(f"Cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ArgumentError(f"Config file {path} must hold a JSON object")
    validate_overrides(data)
    return data


def validate_overrides(data):
    _check_keys(data, TOP_LEVEL_KEYS, 'config')
    for section, allowed in SECTION_KEYS.items():
        if section in data and data[section] is not None:
            if not isinstance(data[section], dict):
                raise ArgumentError(f"Config section '{section}' must be an object")
            _check_keys(data[section], allowed, f"config section '{section}'")


def preset(long_run=False, mode=CLUSTERING, cluster_2d=False):
    """The settings preset for a mode, visualization or 2-D clustering overrides applied"""
    name = 'FULL' if long_run else 'DESK'
    base = copy.deepcopy(settings.COMPRESSIVE_MBN[name])
    if mode == VISUALIZATION:
        base = _merge(base, settings.COMPRESSIVE_MBN_VISUALIZATION_OVERRIDES.get(name, {}))
    elif cluster_2d:
        base = _merge(base, settings.COMPRESSIVE_MBN_CLUSTERING_2D_OVERRIDES.get(name, {}))
    return base


def build_pipeline_config(mode=None, overrides=None, long_run=False, seed=None, threads=None,
                          input_dim=MNIST_INPUT_DIM, num_classes=None, bench_repeats=None,
                          cluster_2d=None):
    """
    Resolve a PipelineConfig from the preset, config-file overrides and flags.
    Flags win over the config file, which wins over the preset. When the
    number of classes is known and the file does not pin kmeans.k, k-means
    uses one cluster per class.
    """
    overrides = copy.deepcopy(overrides or {})
    validate_overrides(overrides)
    mode = mode or overrides.get('mode') or CLUSTERING
    if mode not in MODES:
        raise ArgumentError(f"mode must be one of {MODES}, got {mode!r}")
    if cluster_2d is None:
        cluster_2d = bool(overrides.get('cluster_2d', False))
    if cluster_2d and mode != CLUSTERING:
        raise ArgumentError("cluster_2d applies to clustering mode only")

    values = preset(long_run, mode, cluster_2d)
    mlp_key = 'mlp_visualization' if mode == VISUALIZATION else 'mlp_clustering'
    values['mlp'] = values.pop(mlp_key)
    values.pop('mlp_visualization' if mode == CLUSTERING else 'mlp_clustering', None)

    pinned_k = 'k' in (overrides.get('kmeans') or {})
    values = _merge(values, {
        key: value for key, value in overrides.items() if key not in ('mode', 'cluster_2d')
    })
    if num_classes is not None and not pinned_k:
        values['kmeans']['k'] = int(num_classes)

    run_seed = seed if seed is not None else int(values.get('seed', 0))
    run_threads = threads if threads is not None else int(values['threads'])
    repeats = bench_repeats if bench_repeats is not None else int(values['bench_repeats'])

    mlp_values = values['mlp']
    out_size = values['empca']['target_dim'] if mode == VISUALIZATION else values['kmeans']['k']
    mlp = MlpConfig(
        layer_sizes=(int(input_dim), *mlp_values['hidden_sizes'], int(out_size)),
        output_activation=LINEAR if mode == VISUALIZATION else SIGMOID,
        dropout_rate=mlp_values['dropout_rate'],
        learning_rate=mlp_values['learning_rate'],
        batch_size=mlp_values['batch_size'],
        epochs=mlp_values['epochs'],
    )
    config = PipelineConfig(
        mode=mode,
        mbn=MbnConfig(**values['mbn']),
        empca=EmpcaConfig(**values['empca']),
        kmeans=KmeansConfig(**values['kmeans']),
        mlp=mlp,
        paths={key: str(value) for key, value in (values.get('paths') or {}).items()},
        bench_repeats=repeats,
        threads=run_threads,
        normalize_divisor=float(values['normalize_divisor']),
        long_run=long_run,
        cluster_2d=cluster_2d,
    )
    return config.with_seed(run_seed)
