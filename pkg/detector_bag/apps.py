from django.apps import AppConfig


class DetectorBagConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'detector_bag'
    verbose_name = 'Blocking artifact grid detector'
