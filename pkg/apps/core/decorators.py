# apps/core/decorators.py
"""
Decorators shared by the pipeline stages.
"""

import functools
import logging
import time

from .exceptions import CompressiveMbnError, StageError

logger = logging.getLogger('compressive_mbn.pipeline')


def pipeline_stage(stage_name):
    """
    Decorator that logs a stage's wall-clock time and attaches the stage name
    to any library error raised inside it.

    Usage:
        @pipeline_stage('empca')
        def fit_embedding(...):
            ...
    """
    def decorator(func):
        @functools.wraps(func)
        def wrapped(*args, **kwargs):
            logger.info(f"Stage '{stage_name}' started")
            started = time.perf_counter()
            try:
                result = func(*args, **kwargs)
            except StageError:
                raise
            except CompressiveMbnError as exc:
                logger.error(f"Stage '{stage_name}' failed: {exc}")
                raise StageError(stage_name, exc) from exc
            elapsed = time.perf_counter() - started
            logger.info(f"Stage '{stage_name}' finished in {elapsed:.3f}s")
            return result

        return wrapped
    return decorator
