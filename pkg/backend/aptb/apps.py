from django.apps import AppConfig


class AptbAppConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'aptb'
    verbose_name = 'Noisy prefix tree publication'
