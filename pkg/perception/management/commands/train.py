from perception.ml_models.checkpoint import load_model, save_model
from perception.synth import load_corpus
from perception.utils import record_training_run, train_model

from ._base import PipelineCommand


class Command(PipelineCommand):
    help = 'Train curve bank, response libraries and fusion network on a corpus'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--corpus', required=True, help='corpus directory written by synth')
        parser.add_argument('--out', required=True, help='model directory to write')
        parser.add_argument('--seed', type=int, required=True, help='weight and curve initialization seed')
        parser.add_argument('--epochs', type=int, help='overrides epochs')
        parser.add_argument('--variant', help='overrides variant')
        parser.add_argument('--resume', help='model directory to continue training from')

    def config_overrides(self, options):
        overrides = {}
        if options.get('epochs') is not None:
            overrides['epochs'] = options['epochs']
        if options.get('variant'):
            overrides['variant'] = options['variant']
        return overrides

    def run(self, config, **options):
        groups = load_corpus(options['corpus'])
        model = load_model(options['resume']) if options.get('resume') else None
        model, history = train_model(config, groups, options['seed'], model=model)
        save_model(model, options['out'], extra_meta={'config': config.as_dict(), 'seed': options['seed']})
        scenes = sum(len(group) for group in groups)
        record_training_run(
            config, options['seed'], history, options['out'], scenes, resumed=bool(options.get('resume')),
        )
        for stage, losses in history.items():
            if losses:
                self.stdout.write(f'{stage}: ' + ' '.join(f'{loss:.5f}' for loss in losses))
        self.stdout.write(self.style.SUCCESS(
            f'Trained {config.variant} model for {config.epochs} epochs on {scenes} scenes, saved to {options["out"]}'
        ))
