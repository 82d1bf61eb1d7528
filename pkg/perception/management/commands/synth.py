from perception.synth import make_corpus

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = 'Generate a synthetic multi-illumination garment corpus'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--out', required=True, help='corpus directory to write')
        parser.add_argument('--seed', type=int, required=True, help='first scene seed')
        parser.add_argument('--num-scenes', type=int, help='overrides num_scenes')
        parser.add_argument('--levels', help='comma-separated illumination levels, overrides levels')

    def config_overrides(self, options):
        overrides = {}
        if options.get('num_scenes') is not None:
            overrides['num_scenes'] = options['num_scenes']
        if options.get('levels'):
            overrides['levels'] = options['levels']
        return overrides

    def run(self, config, **options):
        seed = options['seed']
        seeds = range(seed, seed + config.num_scenes)
        written = make_corpus(
            options['out'], seeds, config.level_values,
            width=config.scene_width,
            height=config.scene_height,
            max_garments=config.max_garments,
            depth_noise_sigma=config.depth_noise_sigma,
            depth_hole_fraction=config.depth_hole_fraction,
            workers=config.workers,
        )
        self.stdout.write(self.style.SUCCESS(
            f'Wrote {len(written)} triplets ({config.num_scenes} scenes x {len(config.level_values)} levels) '
            f'to {options["out"]}'
        ))
