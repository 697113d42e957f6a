from benchmark.base import PipelineCommand
from benchmark.services import cmd_detect


class Command(PipelineCommand):
    help = 'Run the configured detectors over every corpus case'
    stage = 'detect'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--detectors', help='Comma separated detector names (overrides detect.detectors)')

    def overrides(self, options):
        overrides = super().overrides(options)
        if options['detectors']:
            names = ', '.join(f'"{name.strip()}"' for name in options['detectors'].split(','))
            overrides.append(f'detect.detectors=[{names}]')
        return overrides

    def run(self, config):
        return cmd_detect(config)
