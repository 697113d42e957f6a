from django.apps import AppConfig


class DetectorCdaConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'detector_cda'
    verbose_name = 'DCT coefficient distribution detectors'
