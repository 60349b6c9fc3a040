from django.apps import AppConfig


class EmpcaAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.empca'
    verbose_name = 'EM-PCA'
