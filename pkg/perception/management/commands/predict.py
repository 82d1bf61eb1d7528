from pathlib import Path

from perception.image_io import read_depth, read_rgb, write_mask
from perception.ml_models.checkpoint import load_model
from perception.serializers import render_grasp_plan
from perception.utils import predict_scene

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = 'Predict a garment mask and grasp plan for one RGB image and depth map'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--model', required=True, help='model directory')
        parser.add_argument('--image', required=True, help='RGB PNG')
        parser.add_argument('--depth', required=True, help='16-bit PGM depth in millimetres')
        parser.add_argument('--out', required=True, help='directory for mask.png and grasps.json')

    def run(self, config, **options):
        model = load_model(options['model'])
        rgb = read_rgb(options['image'])
        depth = read_depth(options['depth'])
        mask, plan = predict_scene(model, rgb, depth, config)

        out = Path(options['out'])
        out.mkdir(parents=True, exist_ok=True)
        write_mask(out / 'mask.png', mask)
        (out / 'grasps.json').write_text(render_grasp_plan(plan))
        self.stdout.write(self.style.SUCCESS(f'Planned {len(plan)} grasps, written to {out}'))
