from django.apps import AppConfig


class ForgerySynthConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'forgery_synth'
    verbose_name = 'Forgery synthesis'
