"""
Django settings for compressive_mbn_project project.

The project hosts the compressive MBN framework: an unsupervised multilayer
bootstrap network (the teacher), its application outputs, and the small
feedforward network distilled from them (the student).

Run presets live in COMPRESSIVE_MBN below; every management command starts
from one of them and layers a JSON config file and CLI flags on top.
"""

from pathlib import Path
import os
from dotenv import load_dotenv

# Load environment variables from .env
load_dotenv()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.environ.get("DJANGO_SECRET_KEY", "insecure-key-for-dev-only")

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',

    # Framework apps
    'apps.core',
    'apps.dataset',
    'apps.mbn',
    'apps.empca',
    'apps.cluster_eval',
    'apps.mlp',
    'apps.pipeline',
]


# Database
# Run history (PipelineRun) is the only persisted state.

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.postgresql',
        'NAME': os.getenv("POSTGRES_DB", "compressive_mbn"),
        'USER': os.getenv("POSTGRES_USER", "cmbn_user"),
        'PASSWORD': os.getenv("POSTGRES_PASSWORD", "password"),
        'HOST': os.getenv("POSTGRES_HOST", "localhost"),
        'PORT': os.getenv("POSTGRES_PORT", "5432"),
    }
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = True

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Logging (see apps/core/logging_config.py)

CMBN_FILE_LOGGING = True
CMBN_LOG_DIR = Path(os.getenv("CMBN_LOG_DIR", BASE_DIR / 'logs'))
CMBN_LOG_LEVEL = os.getenv("CMBN_LOG_LEVEL", "INFO")


# Compressive MBN run presets
#
# DESK is the scaled-down configuration the test suite and default commands
# use. FULL reproduces the MNIST experiments and is only selected with
# --long-run.

COMPRESSIVE_MBN = {
    'DESK': {
        'normalize_divisor': 255.0,
        'bench_repeats': int(os.getenv("CMBN_BENCH_REPEATS", "5")),
        'threads': int(os.getenv("CMBN_THREADS", "1")),
        'mbn': {
            'k_schedule': [256, 128, 64, 32, 16],
            'clusterings_per_layer': 100,
            'feature_fraction': 0.5,
            'reconstruction_rate': 0.0,
        },
        'empca': {
            'target_dim': 5,
            'max_iters': 200,
            'tol': 1e-7,
        },
        'kmeans': {
            'k': 10,
            'n_restarts': 10,
            'max_iters': 300,
        },
        'mlp_visualization': {
            'hidden_sizes': [256, 256],
            'dropout_rate': 0.2,
            'learning_rate': 0.001,
            'batch_size': 32,
            'epochs': 120,
        },
        'mlp_clustering': {
            'hidden_sizes': [256, 256],
            'dropout_rate': 0.2,
            'learning_rate': 0.01,
            'batch_size': 32,
            'epochs': 50,
        },
    },
    'FULL': {
        'normalize_divisor': 255.0,
        'bench_repeats': 1,
        'threads': int(os.getenv("CMBN_THREADS", "1")),
        'mbn': {
            'k_schedule': [4000, 2000, 1000, 500, 250, 125, 65, 30, 15],
            'clusterings_per_layer': 400,
            'feature_fraction': 0.5,
            'reconstruction_rate': 0.0,
        },
        'empca': {
            'target_dim': 5,
            'max_iters': 200,
            'tol': 1e-7,
        },
        'kmeans': {
            'k': 10,
            'n_restarts': 10,
            'max_iters': 300,
        },
        'mlp_visualization': {
            'hidden_sizes': [2048, 2048],
            'dropout_rate': 0.2,
            'learning_rate': 0.001,
            'batch_size': 32,
            'epochs': 120,
        },
        'mlp_clustering': {
            'hidden_sizes': [2048, 2048],
            'dropout_rate': 0.2,
            'learning_rate': 0.001,
            'batch_size': 128,
            'epochs': 50,
        },
    },
}

# Visualization mode maps to two dimensions and, in the full-scale runs, uses
# random reconstruction.
COMPRESSIVE_MBN_VISUALIZATION_OVERRIDES = {
    'DESK': {'empca': {'target_dim': 2}},
    'FULL': {'empca': {'target_dim': 2}, 'mbn': {'reconstruction_rate': 0.5}},
}

# Clustering on the two-dimensional visualization features (--cluster-2d)
COMPRESSIVE_MBN_CLUSTERING_2D_OVERRIDES = {
    'DESK': {'empca': {'target_dim': 2}},
    'FULL': {'empca': {'target_dim': 2}, 'mbn': {'reconstruction_rate': 0.5}},
}
