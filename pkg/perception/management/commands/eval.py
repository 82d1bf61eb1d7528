from pathlib import Path

from perception.ml_models.checkpoint import load_model
from perception.serializers import render_json
from perception.synth import load_corpus
from perception.utils import evaluate_model, record_evaluation

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = 'Evaluate mIoU and grasp success of a model on a corpus'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--model', required=True, help='model directory')
        parser.add_argument('--corpus', required=True, help='corpus directory')
        parser.add_argument('--out', help='write the metrics JSON here instead of stdout')

    def run(self, config, **options):
        model = load_model(options['model'])
        groups = load_corpus(options['corpus'])
        metrics = evaluate_model(model, groups, config)
        record_evaluation(metrics, options['model'], options['corpus'], model.variant)
        text = render_json(metrics)
        if options.get('out'):
            Path(options['out']).write_text(text)
            self.stdout.write(self.style.SUCCESS(
                f'mIoU {metrics["miou"]:.4f}, mGSR {metrics["mgsr"]:.4f} over {metrics["scenes"]} scenes'
            ))
        else:
            self.stdout.write(text, ending='')
