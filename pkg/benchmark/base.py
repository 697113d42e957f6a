import logging

from django.core.management.base import BaseCommand, CommandError

from jpeg_model.exceptions import ForensicsError, InvalidArgument, NotFound

from .config import RunConfig

logger = logging.getLogger(__name__)

EXIT_USAGE = 1
EXIT_PARTIAL = 2
EXIT_FATAL = 3


class PipelineCommand(BaseCommand):
    """Shared options and exit codes of the pipeline commands.

    Subclasses implement ``run(config)`` returning a StageResult.
    """

    def add_arguments(self, parser):
        parser.add_argument('--config', help='TOML run configuration')
        parser.add_argument('--set', action='append', default=[], metavar='SECTION.KEY=VALUE',
                            help='Override one configuration value; may be repeated')
        parser.add_argument('--seed', type=int, help='Run seed (overrides run.seed)')
        parser.add_argument('--workers', type=int, help='Worker processes (overrides run.workers)')
        parser.add_argument('--output-dir', help='Run directory (overrides run.output_dir)')
        parser.add_argument('--force', action='store_true', help='Recompute outputs that already exist')

    def overrides(self, options):
        overrides = list(options['set'])
        for name in ('seed', 'workers'):
            if options[name] is not None:
                overrides.append(f'run.{name}={options[name]}')
        if options['output_dir']:
            overrides.append(f"run.output_dir='{options['output_dir']}'")
        if options['force']:
            overrides.append('run.force=true')
        return overrides

    def handle(self, *args, **options):
        try:
            config = RunConfig.load(options['config'], self.overrides(options))
            result = self.run(config)
        except (InvalidArgument, NotFound) as exc:
            raise CommandError(str(exc), returncode=EXIT_USAGE) from exc
        except (ForensicsError, OSError) as exc:
            logger.exception('%s failed', self.stage)
            raise CommandError(f'{self.stage} failed: {exc}', returncode=EXIT_FATAL) from exc

        summary = f'{self.stage}: {result.done} done, {result.skipped} skipped, {result.failed} failed -> {result.path}'
        if result.failed:
            self.stdout.write(self.style.WARNING(summary))
            raise CommandError(f'{result.failed} {self.stage} items failed', returncode=EXIT_PARTIAL)
        self.stdout.write(self.style.SUCCESS(summary))

    def run(self, config):
        raise NotImplementedError
