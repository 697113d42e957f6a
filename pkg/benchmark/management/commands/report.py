from benchmark.base import PipelineCommand
from benchmark.services import cmd_report


class Command(PipelineCommand):
    help = 'Rebuild the report tables and heatmaps from existing records'
    stage = 'report'

    def run(self, config):
        return cmd_report(config)
