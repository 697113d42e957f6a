from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from detector_cda.services import dump_histograms
from jpeg_model.exceptions import ForensicsError, InvalidArgument
from jpeg_model.services import parse_jpeg


class Command(BaseCommand):
    help = 'Write observed and estimated single-compression AC histograms of a JPEG as CSV'

    def add_arguments(self, parser):
        parser.add_argument('jpeg', help='JPEG file to analyse')
        parser.add_argument('output', help='CSV file to write')
        parser.add_argument('--n-freqs', type=int, default=6, help='Number of AC frequencies in zigzag order')

    def handle(self, *args, **options):
        path = Path(options['jpeg'])
        try:
            j = parse_jpeg(path.read_bytes())
            rows = dump_histograms(j, options['output'], options['n_freqs'])
        except InvalidArgument as exc:
            raise CommandError(str(exc), returncode=1) from exc
        except OSError as exc:
            raise CommandError(f'cannot read {path}: {exc}', returncode=1) from exc
        except ForensicsError as exc:
            raise CommandError(f'{path}: {exc}', returncode=3) from exc
        self.stdout.write(self.style.SUCCESS(f'Wrote {rows} histogram rows to {options["output"]}'))
