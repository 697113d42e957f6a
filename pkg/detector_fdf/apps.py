from django.apps import AppConfig


class DetectorFdfConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'detector_fdf'
    verbose_name = 'First-digit feature detectors'
