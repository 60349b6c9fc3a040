from django.apps import AppConfig


class ClusterEvalConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'apps.cluster_eval'
    verbose_name = 'Clustering and Evaluation'
