from benchmark.base import PipelineCommand
from benchmark.services import cmd_train


class Command(PipelineCommand):
    help = 'Train the window classifiers of the first-digit detectors'
    stage = 'train'

    def run(self, config):
        return cmd_train(config)
