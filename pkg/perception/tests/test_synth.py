import json
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from perception.exceptions import DataError
from perception.image_io import (
    quantize_depth, read_depth, read_mask, read_rgb, write_depth, write_mask, write_rgb,
)
from perception.imageproc import DepthMap
from perception.synth import (
    LUMINANCE_BANDS, SceneSpec, corrupt_depth, degrade, degrade_params, generate_scene, load_corpus,
    luminance_band, make_corpus, quantize_scene, random_spec,
)


class SceneGenerationTests(SimpleTestCase):

    def test_empty_scene(self):
        scene = generate_scene(SceneSpec(seed=1, width=16, height=12, garment_count=0, classes=()))
        self.assertFalse(scene.mask.any())
        np.testing.assert_array_equal(scene.depth.depth, np.ones((12, 16)))

    def test_same_spec_renders_identically(self):
        spec = random_spec(21, 40, 30, 4)
        first, second = generate_scene(spec), generate_scene(spec)
        np.testing.assert_array_equal(first.rgb, second.rgb)
        np.testing.assert_array_equal(first.depth.depth, second.depth.depth)
        np.testing.assert_array_equal(first.mask, second.mask)

    def test_mask_classes_come_from_the_spec(self):
        for seed in range(10):
            spec = random_spec(seed, 32, 32, 4)
            scene = generate_scene(spec)
            self.assertTrue(set(np.unique(scene.mask)) <= set(spec.classes) | {0})
            self.assertEqual(len(set(spec.classes)), spec.garment_count)
            self.assertTrue(1 <= spec.garment_count <= 4)

    def test_closest_point_lies_on_a_garment(self):
        for seed in range(10):
            scene = generate_scene(random_spec(seed, 48, 48, 3))
            row, col = np.unravel_index(np.argmin(scene.depth.depth), scene.mask.shape)
            self.assertNotEqual(scene.mask[row, col], 0)
            self.assertLess(scene.depth.depth[row, col], 1.0)

    def test_invalid_specs(self):
        with self.assertRaises(DataError):
            generate_scene(SceneSpec(seed=0, garment_count=2, classes=(1,)))
        with self.assertRaises(DataError):
            generate_scene(SceneSpec(seed=0, garment_count=1, classes=(12,)))
        with self.assertRaises(DataError):
            random_spec(0, max_garments=9)

    def test_illumination_below_one_is_degraded(self):
        spec = random_spec(2, 24, 24, 2)
        dark = generate_scene(replace(spec, illumination=0.5))
        np.testing.assert_array_equal(dark.rgb, degrade(generate_scene(spec), 0.5).rgb)


class DegradeTests(SimpleTestCase):

    def setUp(self):
        self.scene = generate_scene(random_spec(6, 32, 32, 3))

    def test_full_level_is_identity(self):
        out = degrade(self.scene, 1.0)
        np.testing.assert_array_equal(out.rgb, self.scene.rgb)
        self.assertIsNot(out.rgb, self.scene.rgb)

    def test_only_rgb_changes(self):
        out = degrade(self.scene, 0.4)
        self.assertIs(out.depth, self.scene.depth)
        np.testing.assert_array_equal(out.mask, self.scene.mask)
        self.assertEqual(out.spec.illumination, 0.4)

    def test_not_compositional(self):
        twice = degrade(degrade(self.scene, 0.8), 0.8)
        once = degrade(self.scene, 0.64)
        self.assertGreater(once.rgb.max(), 0.1)
        self.assertGreater(twice.rgb.max(), 0.1)
        self.assertFalse(np.allclose(twice.rgb, once.rgb, atol=1e-3))

    def test_quarter_level_crushes_to_black(self):
        # gain 0.25 then gamma 2.5 stays below the 0.0375 black crush for any input
        np.testing.assert_array_equal(degrade(self.scene, 0.25).rgb, 0.0)

    def test_mean_luma_rises_with_level(self):
        lumas = [degrade(self.scene, level / 10).mean_luma for level in range(11)]
        self.assertTrue(np.all(np.diff(lumas) >= 0), lumas)

    def test_schedule(self):
        params = degrade_params(0.5)
        self.assertEqual((params.gamma, params.gain), (2.0, 0.5))
        self.assertAlmostEqual(params.black_crush, 0.025)
        self.assertAlmostEqual(params.noise_sigma, 0.015)
        with self.assertRaises(DataError):
            degrade_params(1.5)

    def test_noise_is_seeded(self):
        np.testing.assert_array_equal(degrade(self.scene, 0.6).rgb, degrade(self.scene, 0.6).rgb)

    def test_bands(self):
        self.assertEqual(
            [luminance_band(v) for v in (0.0, 29.9, 30.0, 75.0, 119.0, 200.0)],
            ['0-30', '0-30', '30-60', '60-90', '90-120', '90-120'],
        )


class DepthCorruptionTests(SimpleTestCase):

    def test_holes_and_noise(self):
        d = DepthMap.from_array(np.full((20, 20), 0.9))
        out = corrupt_depth(d, seed=3, noise_sigma=0.01, hole_fraction=0.2)
        self.assertTrue(0 < out.holes.sum() < 400)
        self.assertTrue(np.all(out.depth[out.holes] == 0))
        again = corrupt_depth(d, seed=3, noise_sigma=0.01, hole_fraction=0.2)
        np.testing.assert_array_equal(out.depth, again.depth)

    def test_no_corruption_returns_input(self):
        d = DepthMap.from_array(np.full((4, 4), 0.9))
        self.assertIs(corrupt_depth(d, seed=0), d)

    def test_invalid_fraction(self):
        with self.assertRaises(DataError):
            corrupt_depth(DepthMap.from_array(np.ones((2, 2))), 0, hole_fraction=1.0)


class ImageFileTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_rgb(self):
        rgb = np.random.RandomState(0).uniform(size=(5, 7, 3))
        write_rgb(self.root / 'rgb.png', rgb)
        np.testing.assert_array_equal(read_rgb(self.root / 'rgb.png'), np.round(rgb * 255) / 255)

    def test_mask(self):
        mask = np.random.RandomState(1).randint(0, 9, size=(6, 4))
        write_mask(self.root / 'mask.png', mask)
        np.testing.assert_array_equal(read_mask(self.root / 'mask.png'), mask)
        with self.assertRaises(DataError):
            write_mask(self.root / 'bad.png', np.full((2, 2), 300))

    def test_depth_in_millimetres(self):
        depth = np.array([[0.9004, 0.0], [1.25, np.nan]])
        write_depth(self.root / 'depth.pgm', DepthMap.from_array(depth))
        loaded = read_depth(self.root / 'depth.pgm')
        np.testing.assert_array_equal(loaded.depth, [[0.9, 0.0], [1.25, 0.0]])
        np.testing.assert_array_equal(loaded.valid, [[True, False], [True, False]])
        with self.assertRaises(DataError):
            write_depth(self.root / 'far.pgm', DepthMap.from_array(np.full((2, 2), 70.0)))

    def test_missing_file(self):
        with self.assertRaises(DataError):
            read_rgb(self.root / 'absent.png')


class CorpusTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def _corpus(self, name, **kwargs):
        return make_corpus(self.root / name, seeds=[4, 2], levels=[1.0, 0.7, 0.4], width=24, height=20, **kwargs)

    def test_layout(self):
        written = self._corpus('a')
        self.assertEqual(len(written), 6)
        self.assertEqual(len(list((self.root / 'a').glob('*/*/meta.json'))), 6)
        for level in ('1.00', '0.70', '0.40'):
            for name in ('rgb.png', 'depth.pgm', 'mask.png', 'meta.json'):
                self.assertTrue((self.root / 'a' / '2' / level / name).is_file())
        meta = json.loads((self.root / 'a' / '4' / '0.40' / 'meta.json').read_text())
        self.assertEqual(meta['spec']['illumination'], 0.4)
        self.assertIn(meta['band'], LUMINANCE_BANDS)

    def test_identical_bytes_across_runs(self):
        self._corpus('a')
        self._corpus('b')
        files_a = sorted(p.relative_to(self.root / 'a') for p in (self.root / 'a').rglob('*') if p.is_file())
        files_b = sorted(p.relative_to(self.root / 'b') for p in (self.root / 'b').rglob('*') if p.is_file())
        self.assertEqual(files_a, files_b)
        for rel in files_a:
            self.assertEqual((self.root / 'a' / rel).read_bytes(), (self.root / 'b' / rel).read_bytes())

    def test_reads_back_the_quantized_scenes(self):
        self._corpus('a')
        groups = load_corpus(self.root / 'a')
        self.assertEqual([g[0].spec.seed for g in groups], [2, 4])
        self.assertEqual([s.spec.illumination for s in groups[0]], [1.0, 0.7, 0.4])
        base = generate_scene(random_spec(2, 24, 20, 4))
        expected = quantize_scene(degrade(base, 0.7))
        loaded = groups[0][1]
        np.testing.assert_array_equal(loaded.rgb, expected.rgb)
        np.testing.assert_array_equal(loaded.depth.depth, expected.depth.depth)
        np.testing.assert_array_equal(loaded.mask, expected.mask)
        self.assertEqual(loaded.mean_luma, expected.mean_luma)

    def test_depth_corruption_is_shared_across_levels(self):
        self._corpus('a', depth_noise_sigma=0.005, depth_hole_fraction=0.1)
        group = load_corpus(self.root / 'a')[0]
        self.assertTrue(group[0].depth.holes.any())
        for scene in group[1:]:
            np.testing.assert_array_equal(scene.depth.depth, group[0].depth.depth)

    def test_empty_inputs(self):
        with self.assertRaises(DataError):
            make_corpus(self.root / 'x', seeds=[], levels=[1.0])
        with self.assertRaises(DataError):
            load_corpus(self.root / 'missing')

    def test_quantized_depth_matches_file(self):
        d = generate_scene(random_spec(8, 16, 16, 2)).depth
        write_depth(self.root / 'd.pgm', d)
        np.testing.assert_array_equal(read_depth(self.root / 'd.pgm').depth, quantize_depth(d).depth)
