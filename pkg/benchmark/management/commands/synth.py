from benchmark.base import PipelineCommand
from benchmark.services import cmd_synth


class Command(PipelineCommand):
    help = 'Synthesize the double-JPEG forgery corpus and its manifest'
    stage = 'synth'

    def run(self, config):
        return cmd_synth(config)
