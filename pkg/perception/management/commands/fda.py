from pathlib import Path

from perception.exceptions import DataError
from perception.fda import fda_batch, fda_transfer
from perception.image_io import read_rgb, write_rgb

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = 'Fourier domain adaptation of a source image (or directory) toward a target style'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--source', required=True, help='source PNG, or directory of PNGs')
        parser.add_argument('--target', required=True, help='target PNG, or directory of style PNGs')
        parser.add_argument('--out', required=True, help='output PNG, or directory in batch mode')
        parser.add_argument('--beta', type=float, help='overrides fda_beta')
        parser.add_argument('--seed', type=int, default=0, help='pairing seed in batch mode')

    def config_overrides(self, options):
        return {'fda_beta': options['beta']} if options.get('beta') is not None else {}

    def run(self, config, **options):
        source, target, out = Path(options['source']), Path(options['target']), Path(options['out'])
        if not source.is_dir():
            write_rgb(out, fda_transfer(read_rgb(source), read_rgb(target), config.fda_beta))
            self.stdout.write(self.style.SUCCESS(f'Wrote {out}'))
            return

        sources = sorted(source.glob('*.png'))
        styles = sorted(target.glob('*.png')) if target.is_dir() else [target]
        if not sources:
            raise DataError(f'no PNG images in {source}')
        images, picks = fda_batch(
            [read_rgb(p) for p in sources], [read_rgb(p) for p in styles], config.fda_beta, options['seed'],
        )
        out.mkdir(parents=True, exist_ok=True)
        for path, image, pick in zip(sources, images, picks):
            write_rgb(out / path.name, image)
            self.stdout.write(f'{path.name} <- {styles[pick].name}')
        self.stdout.write(self.style.SUCCESS(f'Wrote {len(images)} images to {out}'))
