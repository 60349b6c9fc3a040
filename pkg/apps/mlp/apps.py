from django.apps import AppConfig


class MlpAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.mlp'
    verbose_name = 'Student Network'
