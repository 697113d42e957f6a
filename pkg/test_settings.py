import logging

from django.conf import settings
from django.test import SimpleTestCase


class SettingsConfigurationTests(SimpleTestCase):
    def test_debug_setting(self):
        self.assertIsInstance(settings.DEBUG, bool)
        self.assertFalse(settings.DEBUG)

    def test_secret_key_setting(self):
        self.assertIsInstance(settings.SECRET_KEY, str)
        self.assertGreater(len(settings.SECRET_KEY), 0)

    def test_installed_apps_setting(self):
        """Every pipeline stage is an installed app so its commands are discovered."""
        required_apps = [
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
        for app in required_apps:
            self.assertIn(app, settings.INSTALLED_APPS)

    def test_no_database(self):
        self.assertEqual(settings.DATABASES, {})


class RunDefaultsTests(SimpleTestCase):
    def test_worker_default(self):
        self.assertIsInstance(settings.FORENSICS_WORKERS, int)
        self.assertGreaterEqual(settings.FORENSICS_WORKERS, 1)

    def test_seed_is_optional(self):
        self.assertTrue(settings.FORENSICS_SEED is None or isinstance(settings.FORENSICS_SEED, int))

    def test_output_dir_is_a_path(self):
        self.assertTrue(hasattr(settings.FORENSICS_OUTPUT_DIR, 'joinpath'))


class LoggingSettingsTests(SimpleTestCase):
    def test_logging_setting(self):
        self.assertIsInstance(settings.LOGGING, dict)
        self.assertIn('verbose', settings.LOGGING['formatters'])

    def test_every_app_has_a_logger(self):
        for app in ('jpeg_model', 'fusion', 'evaluation', 'benchmark'):
            self.assertIn(app, settings.LOGGING['loggers'])
            self.assertEqual(settings.LOGGING['loggers'][app]['level'], settings.FORENSICS_LOG_LEVEL)

    def test_log_level_is_numeric(self):
        self.assertIn(settings.FORENSICS_LOG_LEVEL, (logging.DEBUG, logging.INFO, logging.WARNING, logging.ERROR,
                                                     logging.CRITICAL))
