from perception.image_io import read_depth, write_depth
from perception.imageproc import enhance_depth

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = 'Bilateral smoothing and hole filling of a depth map'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--input', required=True, help='16-bit PGM depth in millimetres')
        parser.add_argument('--output', required=True, help='enhanced depth PGM to write')

    def run(self, config, **options):
        depth = read_depth(options['input'])
        holes = int(depth.holes.sum())
        enhanced = enhance_depth(depth, **config.depth_params())
        write_depth(options['output'], enhanced)
        self.stdout.write(self.style.SUCCESS(f'Filled {holes} holes, written to {options["output"]}'))
