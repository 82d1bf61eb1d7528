"""
End-to-end variant comparisons on synthetic corpora. Tagged slow; run with
`python manage.py test perception --tag slow`.
"""
from django.test import SimpleTestCase, tag

from perception.utils import band_drop, compare_variants, split_groups

from .helpers import scene_groups, tiny_config

LEVELS = (1.0, 0.85, 0.7, 0.55)
SEEDS = (0, 1, 2, 3, 4)
SCENES = 60
VARIANTS = ('full', 'fixed_slot', 'no_library')


def _config():
    return tiny_config(n_curves=12, channels=8, patch=2, epochs=10, lr=0.01, retinex_sigma=1.0)


@tag('slow')
class VariantComparisonTests(SimpleTestCase):
    """Every variant trained identically per seed on its own 60-scene corpus"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.runs = []
        for seed in SEEDS:
            groups = scene_groups(range(seed * SCENES, (seed + 1) * SCENES), levels=LEVELS, size=32)
            train_groups, test_groups = split_groups(groups, test_fraction=0.25, seed=seed)
            cls.runs.append(compare_variants(_config(), train_groups, test_groups, seed, VARIANTS))

    def test_metrics_are_in_range(self):
        for run in self.runs:
            for metrics in run.values():
                self.assertTrue(0.0 <= metrics['miou'] <= 1.0)
                self.assertEqual(metrics['scenes'], 15 * len(LEVELS))

    def test_curve_indexing_beats_a_fixed_slot(self):
        pairs = [(run['full']['miou'], run['fixed_slot']['miou']) for run in self.runs]
        self.assertGreaterEqual(sum(full > fixed for full, fixed in pairs), 4, pairs)

    def test_libraries_shrink_the_illumination_drop(self):
        drops = [(band_drop(run['full']), band_drop(run['no_library'])) for run in self.runs]
        self.assertGreaterEqual(sum(full < other for full, other in drops), 4, drops)
