from benchmark.base import PipelineCommand
from benchmark.services import cmd_fuse


class Command(PipelineCommand):
    help = 'Fuse the candidate maps of every case into a decision map'
    stage = 'fuse'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--preset', help='Fusion preset (overrides fusion.preset)')

    def overrides(self, options):
        overrides = super().overrides(options)
        if options['preset']:
            overrides.append(f'fusion.preset="{options["preset"]}"')
        return overrides

    def run(self, config):
        return cmd_fuse(config)
