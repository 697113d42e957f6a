from benchmark.base import PipelineCommand
from benchmark.services import cmd_eval


class Command(PipelineCommand):
    help = 'Evaluate every map against its ground truth and write the reports'
    stage = 'eval'

    def run(self, config):
        return cmd_eval(config)
