from django.apps import AppConfig


class MbnAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.mbn'
    verbose_name = 'Multilayer Bootstrap Network'
