"""
Django settings for the JPEG forgery localization toolkit.

Only the management-command machinery is used: there is no database, no
URL routing and no middleware. Run parameters come from TOML run configs;
the environment supplies their defaults.
"""
from pathlib import Path

from environs import Env

env = Env()
env.read_env()

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = env('DJANGO_SECRET_KEY', default='forensics-local-only')

DEBUG = env.bool('DJANGO_DEBUG', default=False)

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    # Local
    'jpeg_model.apps.JpegModelConfig',
    'tampering_maps.apps.TamperingMapsConfig',
    'forgery_synth.apps.ForgerySynthConfig',
    'detector_bag.apps.DetectorBagConfig',
    'detector_cda.apps.DetectorCdaConfig',
    'detector_fdf.apps.DetectorFdfConfig',
    'fusion.apps.FusionConfig',
    'evaluation.apps.EvaluationConfig',
    'benchmark.apps.BenchmarkConfig',
]

DATABASES = {}

TIME_ZONE = 'UTC'

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# Run defaults; a run config or command-line option overrides each of them.
FORENSICS_SEED = env.int('FORENSICS_SEED', default=None)
FORENSICS_WORKERS = env.int('FORENSICS_WORKERS', default=1)
FORENSICS_OUTPUT_DIR = env.path('FORENSICS_OUTPUT_DIR', default=BASE_DIR / 'runs')
FORENSICS_LOG_LEVEL = env.log_level('FORENSICS_LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '%(asctime)s %(levelname)s %(name)s %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        app: {'handlers': ['console'], 'level': FORENSICS_LOG_LEVEL, 'propagate': False}
        for app in (
            'jpeg_model', 'tampering_maps', 'forgery_synth', 'detector_bag', 'detector_cda',
            'detector_fdf', 'fusion', 'evaluation', 'benchmark',
        )
    },
}
