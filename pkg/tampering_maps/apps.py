from django.apps import AppConfig


class TamperingMapsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'tampering_maps'
    verbose_name = 'Tampering maps'
