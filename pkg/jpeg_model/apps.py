from django.apps import AppConfig


class JpegModelConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'jpeg_model'
    verbose_name = 'Baseline JPEG model'
