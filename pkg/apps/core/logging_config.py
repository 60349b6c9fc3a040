# apps/core/logging_config.py
"""
Logging configuration for pipeline runs, benchmarks and run records
"""

import os
from django.conf import settings


def build_pipeline_logging(log_dir, level='INFO'):
    """Return the dictConfig for the compressive_mbn loggers rooted at log_dir."""
    return {
        'version': 1,
        'disable_existing_loggers': False,
        'formatters': {
            'pipeline_detailed': {
                'format': '[{asctime}] {levelname} {name} - {message}',
                'style': '{',
            },
            'bench_detailed': {
                'format': '[{asctime}] BENCH {name} - {message}',
                'style': '{',
            },
            'audit_detailed': {
                'format': '[{asctime}] AUDIT Run: {run_id} Status: {status} - {message}',
                'style': '{',
            },
        },
        'handlers': {
            'pipeline_file': {
                'level': level,
                'class': 'logging.handlers.RotatingFileHandler',
                'filename': os.path.join(log_dir, 'pipeline.log'),
                'maxBytes': 10*1024*1024,  # 10MB
                'backupCount': 5,
                'formatter': 'pipeline_detailed',
            },
            'bench_file': {
                'level': 'INFO',
                'class': 'logging.handlers.RotatingFileHandler',
                'filename': os.path.join(log_dir, 'bench.log'),
                'maxBytes': 10*1024*1024,  # 10MB
                'backupCount': 5,
                'formatter': 'bench_detailed',
            },
            'audit_file': {
                'level': 'INFO',
                'class': 'logging.handlers.RotatingFileHandler',
                'filename': os.path.join(log_dir, 'audit.log'),
                'maxBytes': 10*1024*1024,  # 10MB
                'backupCount': 10,
                'formatter': 'audit_detailed',
            },
            'pipeline_console': {
                'level': level,
                'class': 'logging.StreamHandler',
                'formatter': 'pipeline_detailed',
            },
        },
        'loggers': {
            'compressive_mbn': {
                'handlers': ['pipeline_file', 'pipeline_console'],
                'level': level,
                'propagate': False,
            },
            'compressive_mbn.bench': {
                'handlers': ['bench_file', 'pipeline_console'],
                'level': 'INFO',
                'propagate': False,
            },
            'compressive_mbn.audit': {
                'handlers': ['audit_file'],
                'level': 'INFO',
                'propagate': False,
            },
        },
    }


def setup_pipeline_logging():
    """
    Set up pipeline logging configuration.
    Called from CoreConfig.ready().
    """
    import logging.config

    log_dir = str(settings.CMBN_LOG_DIR)

    # Ensure logs directory exists
    os.makedirs(log_dir, exist_ok=True)

    logging.config.dictConfig(build_pipeline_logging(log_dir, settings.CMBN_LOG_LEVEL))

    logging.getLogger('compressive_mbn').debug("Pipeline logging initialized")
