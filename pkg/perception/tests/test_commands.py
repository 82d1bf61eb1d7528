import json
import shutil
import tempfile
from contextlib import redirect_stderr
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import CommandError, call_command
from django.test import TestCase

from perception.image_io import read_depth, read_rgb, write_depth, write_mask, write_rgb
from perception.imageproc import DepthMap
from perception.management.commands.synth import Command as SynthCommand
from perception.ml_models.checkpoint import FILES, MODEL_FILE, load_model
from perception.models import EvaluationReport, TrainingRun
from perception.serializers import render_grasp_plan
from perception.synth import LUMINANCE_BANDS
from perception.utils import predict_scene

from .helpers import TINY, tiny_config

OVERRIDES = [f'{key}={value}' for key, value in TINY.items()]
MODEL_FILES = (MODEL_FILE, *FILES.values())


def run(name, **options):
    out = StringIO()
    call_command(name, stdout=out, overrides=OVERRIDES + options.pop('extra', []), **options)
    return out.getvalue()


class CommandTestCase(TestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.root = Path(tempfile.mkdtemp())
        cls.corpus = cls.root / 'corpus'
        cls.model_dir = cls.root / 'model'
        run('synth', out=str(cls.corpus), seed=0)
        run('train', corpus=str(cls.corpus), out=str(cls.model_dir), seed=0)

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.root, ignore_errors=True)
        super().tearDownClass()

    def setUp(self):
        self.tmp = Path(tempfile.mkdtemp(dir=self.root))

    def assertExitCode(self, code, name, **options):
        with self.assertRaises(CommandError) as ctx:
            run(name, **options)
        self.assertEqual(ctx.exception.returncode, code)
        return str(ctx.exception)


class SynthCommandTests(CommandTestCase):

    def test_counts(self):
        self.assertEqual(len(list(self.corpus.glob('*/*/meta.json'))), 6)
        self.assertEqual(sorted(p.name for p in self.corpus.iterdir()), ['0', '1', '2'])

    def test_repeat_run_is_byte_identical(self):
        again = self.tmp / 'corpus'
        run('synth', out=str(again), seed=0)
        for path in self.corpus.rglob('*'):
            if path.is_file():
                self.assertEqual(path.read_bytes(), (again / path.relative_to(self.corpus)).read_bytes())

    def test_option_overrides(self):
        out = self.tmp / 'small'
        run('synth', out=str(out), seed=5, num_scenes=1, levels='1.0,0.5,0.25')
        self.assertEqual(sorted(p.name for p in (out / '5').iterdir()), ['0.25', '0.50', '1.00'])

    def test_unknown_config_key(self):
        message = self.assertExitCode(1, 'synth', out=str(self.tmp / 'x'), seed=0, extra=['n_curvs=3'])
        self.assertIn('n_curvs', message)

    def test_invalid_config_value(self):
        message = self.assertExitCode(1, 'synth', out=str(self.tmp / 'x'), seed=0, extra=['alpha=2'])
        self.assertIn('alpha', message)

    def test_config_file(self):
        cfg = self.tmp / 'run.cfg'
        cfg.write_text('# one scene\nnum_scenes = 1\nlevels = 1.0\n')
        out = self.tmp / 'from_file'
        stdout = StringIO()
        call_command('synth', config=str(cfg), out=str(out), seed=3, stdout=stdout,
                     overrides=['scene_width=16', 'scene_height=16'])
        self.assertEqual(len(list(out.glob('*/*/meta.json'))), 1)

    def test_missing_required_option(self):
        with self.assertRaises(CommandError) as ctx:
            call_command('synth', out=str(self.tmp / 'x'), stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertIn('--seed', str(ctx.exception))

    def test_command_line_usage_error_exits_with_one(self):
        command = SynthCommand(stdout=StringIO(), stderr=StringIO())
        with self.assertRaises(SystemExit) as ctx, redirect_stderr(StringIO()) as stderr:
            command.run_from_argv(['manage.py', 'synth', '--out', str(self.tmp / 'x')])
        self.assertEqual(ctx.exception.code, 1)
        self.assertIn('--seed', stderr.getvalue())

    def test_command_line_config_file_and_bad_key(self):
        cfg = self.tmp / 'run.cfg'
        cfg.write_text('num_scenes = 1\nlevels = 1.0\nscene_width = 8\nscene_height = 8\n')
        out = self.tmp / 'argv'
        SynthCommand(stdout=StringIO(), stderr=StringIO()).run_from_argv(
            ['manage.py', 'synth', '--config', str(cfg), '--out', str(out), '--seed', '5']
        )
        self.assertEqual(len(list(out.glob('*/*/meta.json'))), 1)
        with self.assertRaises(SystemExit) as ctx:
            SynthCommand(stdout=StringIO(), stderr=StringIO()).run_from_argv(
                ['manage.py', 'synth', '--config', str(cfg), '--out', str(out), '--seed', '5',
                 '--set', 'bogus=1']
            )
        self.assertEqual(ctx.exception.code, 1)


class TrainCommandTests(CommandTestCase):

    def test_checkpoint_and_run_record(self):
        for name in MODEL_FILES:
            self.assertTrue((self.model_dir / name).is_file())
        output = run('train', corpus=str(self.corpus), out=str(self.tmp / 'm'), seed=1)
        self.assertIn('mask:', output)
        record = TrainingRun.objects.get(seed=1)
        self.assertEqual((record.seed, record.variant, record.epochs, record.scenes), (1, 'full', 2, 6))

    def test_resume_with_no_epochs_reproduces_the_checkpoint(self):
        resumed = self.tmp / 'resumed'
        run('train', corpus=str(self.corpus), out=str(resumed), seed=0, resume=str(self.model_dir), epochs=0)
        for name in FILES.values():
            self.assertEqual((resumed / name).read_bytes(), (self.model_dir / name).read_bytes(), msg=name)
        original, reloaded = load_model(self.model_dir), load_model(resumed)
        for name, value in original.parameters().items():
            np.testing.assert_array_equal(reloaded.parameters()[name], value)
        self.assertEqual(TrainingRun.objects.filter(resumed=True).count(), 1)

    def test_untrained_model_cannot_predict(self):
        untrained = self.tmp / 'untrained'
        run('train', corpus=str(self.corpus), out=str(untrained), seed=0, epochs=0)
        scene_dir = self.corpus / '0' / '1.00'
        self.assertExitCode(
            2, 'predict', model=str(untrained), image=str(scene_dir / 'rgb.png'),
            depth=str(scene_dir / 'depth.pgm'), out=str(self.tmp / 'pred'),
        )

    def test_variant_option(self):
        run('train', corpus=str(self.corpus), out=str(self.tmp / 'fixed'), seed=0, variant='fixed_slot')
        self.assertEqual(load_model(self.tmp / 'fixed').variant, 'fixed_slot')

    def test_missing_corpus(self):
        self.assertExitCode(2, 'train', corpus=str(self.tmp / 'nothing'), out=str(self.tmp / 'm'), seed=0)


class PredictCommandTests(CommandTestCase):

    def setUp(self):
        super().setUp()
        self.scene_dir = self.corpus / '1' / '0.70'

    def _predict(self, out):
        return run(
            'predict', model=str(self.model_dir), image=str(self.scene_dir / 'rgb.png'),
            depth=str(self.scene_dir / 'depth.pgm'), out=str(out),
        )

    def test_outputs_match_library_calls(self):
        out = self.tmp / 'pred'
        self._predict(out)
        mask, plan = predict_scene(
            load_model(self.model_dir), read_rgb(self.scene_dir / 'rgb.png'),
            read_depth(self.scene_dir / 'depth.pgm'), tiny_config(),
        )
        write_mask(self.tmp / 'expected.png', mask)
        self.assertEqual((out / 'mask.png').read_bytes(), (self.tmp / 'expected.png').read_bytes())
        self.assertEqual((out / 'grasps.json').read_text(), render_grasp_plan(plan))
        for entry in json.loads((out / 'grasps.json').read_text()):
            self.assertEqual(list(entry), ['class', 'row', 'col', 'depth_m'])

    def test_deterministic(self):
        self._predict(self.tmp / 'a')
        self._predict(self.tmp / 'b')
        for name in ('mask.png', 'grasps.json'):
            self.assertEqual((self.tmp / 'a' / name).read_bytes(), (self.tmp / 'b' / name).read_bytes())

    def test_missing_depth_file(self):
        message = self.assertExitCode(
            2, 'predict', model=str(self.model_dir), image=str(self.scene_dir / 'rgb.png'),
            depth=str(self.tmp / 'absent.pgm'), out=str(self.tmp / 'pred'),
        )
        self.assertIn('absent.pgm', message)


class EvalAndInspectCommandTests(CommandTestCase):

    def test_metrics_file(self):
        out = self.tmp / 'metrics.json'
        run('eval', model=str(self.model_dir), corpus=str(self.corpus), out=str(out))
        metrics = json.loads(out.read_text())
        self.assertEqual(set(metrics['bands']), set(LUMINANCE_BANDS))
        self.assertEqual(metrics['scenes'], 6)
        self.assertEqual(EvaluationReport.objects.get().scenes, 6)

    def test_metrics_on_stdout_are_reproducible(self):
        first = run('eval', model=str(self.model_dir), corpus=str(self.corpus))
        second = run('eval', model=str(self.model_dir), corpus=str(self.corpus))
        self.assertEqual(first, second)
        self.assertIn('"miou"', first)

    def test_inspect(self):
        dump = json.loads(run('inspect', model=str(self.model_dir)))
        self.assertEqual(dump['curve_bank']['n_curves'], 4)
        self.assertEqual(len(dump['curve_bank']['curve_means']), 4)
        self.assertEqual(dump['luminance_library']['dim'], 4)
        self.assertEqual(dump['hparams']['variant'], 'full')

    def test_missing_model(self):
        self.assertExitCode(2, 'inspect', model=str(self.tmp / 'none'))


class ImageCommandTests(CommandTestCase):

    def test_enhance_depth_fills_holes(self):
        depth = np.full((12, 12), 0.9)
        depth[3:5, 6:9] = 0.0
        write_depth(self.tmp / 'in.pgm', DepthMap.from_array(depth))
        output = run('enhance_depth', input=str(self.tmp / 'in.pgm'), output=str(self.tmp / 'out.pgm'))
        self.assertIn('Filled 6 holes', output)
        enhanced = read_depth(self.tmp / 'out.pgm')
        self.assertFalse(enhanced.holes.any())
        np.testing.assert_allclose(enhanced.depth, 0.9)

    def test_fda_zero_beta_copies_the_source(self):
        rng = np.random.RandomState(0)
        write_rgb(self.tmp / 'src.png', rng.uniform(size=(16, 16, 3)))
        write_rgb(self.tmp / 'trg.png', rng.uniform(size=(16, 16, 3)))
        run('fda', source=str(self.tmp / 'src.png'), target=str(self.tmp / 'trg.png'),
            out=str(self.tmp / 'out.png'), beta=0.0)
        np.testing.assert_array_equal(read_rgb(self.tmp / 'out.png'), read_rgb(self.tmp / 'src.png'))

    def test_fda_batch(self):
        rng = np.random.RandomState(1)
        (self.tmp / 'src').mkdir()
        (self.tmp / 'style').mkdir()
        for i in range(3):
            write_rgb(self.tmp / 'src' / f'{i}.png', rng.uniform(size=(16, 16, 3)))
        for i in range(2):
            write_rgb(self.tmp / 'style' / f's{i}.png', rng.uniform(size=(16, 16, 3)))
        run('fda', source=str(self.tmp / 'src'), target=str(self.tmp / 'style'),
            out=str(self.tmp / 'out'), beta=0.1, seed=4)
        self.assertEqual(sorted(p.name for p in (self.tmp / 'out').iterdir()), ['0.png', '1.png', '2.png'])

    def test_fda_shape_mismatch(self):
        write_rgb(self.tmp / 'src.png', np.zeros((8, 8, 3)))
        write_rgb(self.tmp / 'trg.png', np.zeros((8, 10, 3)))
        self.assertExitCode(
            2, 'fda', source=str(self.tmp / 'src.png'), target=str(self.tmp / 'trg.png'),
            out=str(self.tmp / 'out.png'),
        )
