from perception.ml_models.checkpoint import load_model
from perception.serializers import render_json
from perception.utils import inspect_model

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = 'Dump curve bank and response library statistics of a model as JSON'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--model', required=True, help='model directory')

    def run(self, config, **options):
        self.stdout.write(render_json(inspect_model(load_model(options['model']))), ending='')
