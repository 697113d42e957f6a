from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from jpeg_model.exceptions import ForensicsError
from jpeg_model.services import dump_coefficients, parse_jpeg


class Command(BaseCommand):
    help = 'Print the quantized DCT coefficients of a baseline JPEG, one block per line'

    def add_arguments(self, parser):
        parser.add_argument('jpeg', help='JPEG file to parse')

    def handle(self, *args, **options):
        path = Path(options['jpeg'])
        try:
            j = parse_jpeg(path.read_bytes())
        except OSError as exc:
            raise CommandError(f'cannot read {path}: {exc}', returncode=1) from exc
        except ForensicsError as exc:
            raise CommandError(f'{path}: {exc}', returncode=3) from exc
        self.stdout.write(dump_coefficients(j), ending='')
