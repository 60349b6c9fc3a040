from django.apps import AppConfig
from django.conf import settings


class CoreConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.core'
    verbose_name = 'Compressive MBN Core'

    def ready(self):
        """Install the pipeline logging configuration once settings are loaded"""
        if getattr(settings, 'CMBN_FILE_LOGGING', True):
            from .logging_config import setup_pipeline_logging
            setup_pipeline_logging()
