from benchmark.base import PipelineCommand
from benchmark.services import cmd_gridsearch


class Command(PipelineCommand):
    help = 'Rank fusion parameters over a sampled sub-corpus'
    stage = 'gridsearch'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--metric', choices=['f1', 'auc'], help='Ranking metric (overrides gridsearch.metric)')

    def overrides(self, options):
        overrides = super().overrides(options)
        if options['metric']:
            overrides.append(f'gridsearch.metric="{options["metric"]}"')
        return overrides

    def run(self, config):
        return cmd_gridsearch(config)
