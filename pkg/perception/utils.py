"""
Utility functions for the perception pipeline
"""
import logging
from dataclasses import replace

import numpy as np
import pandas as pd
from django.conf import settings
from django.db import DatabaseError
from joblib import Parallel, delayed
from sklearn.metrics import confusion_matrix
from sklearn.utils import check_random_state

from .exceptions import DataError
from .grasp import grasp_succeeds, plan_grasp_sequence, select_center_grasp_point
from .imageproc import enhance_depth
from .ml_models.fusion import (
    GarmentPerceptionModel, predict_mask, train_luminance_alignment, train_mask, train_structure,
)
from .models import EvaluationReport, TrainingRun
from .serializers import EvaluationMetricsSerializer, ModelDumpSerializer
from .synth import LUMINANCE_BANDS, luminance_band

logger = logging.getLogger(__name__)


def build_model(config, seed):
    """Fresh model with seeded weights and curves"""
    return GarmentPerceptionModel.initialize(config.model_hparams(), seed)


def prepare_depth(depth, config):
    if not config.enhance_depth:
        return depth
    return enhance_depth(depth, **config.depth_params())


def prepare_groups(groups, config):
    """Scenes with their depth maps enhanced when the config asks for it"""
    if not config.enhance_depth:
        return groups
    return [[replace(scene, depth=prepare_depth(scene.depth, config)) for scene in group] for group in groups]


def train_model(config, groups, seed, model=None):
    """
    Run luminance alignment, structure modeling and mask training in order.
    Returns the model and the per-stage loss history.
    """
    if model is None:
        model = build_model(config, seed)
    history = {'alignment': [], 'structure': [], 'mask': []}
    if config.epochs == 0:
        logger.info('epochs=0, returning the untrained model')
        return model, history

    groups = prepare_groups(groups, config)
    history['alignment'] = train_luminance_alignment(model, groups, config.epochs, config.lr, config.plc_lr)
    history['structure'] = train_structure(model, groups, config.epochs, config.lr)
    scenes = [scene for group in groups for scene in group]
    history['mask'] = train_mask(model, scenes, config.epochs, config.lr)
    return model, history


def record_training_run(config, seed, history, checkpoint_path, scenes, resumed=False):
    try:
        return TrainingRun.objects.create(
            seed=seed,
            variant=config.variant,
            epochs=config.epochs,
            scenes=scenes,
            config=config.as_dict(),
            loss_history=history,
            checkpoint_path=str(checkpoint_path),
            resumed=resumed,
        )
    except DatabaseError as exc:
        logger.warning('could not record training run: %s', exc)
        return None


def predict_scene(model, rgb, depth, config):
    """Semantic mask and grasp plan for one RGB-depth pair"""
    mask = predict_mask(model, rgb)
    plan = plan_grasp_sequence(mask, prepare_depth(depth, config), k_fraction=config.grasp_k_fraction)
    return mask, plan


def mean_iou(matrix):
    """
    Mean IoU over garment classes (1..C-1) that occur in truth or prediction,
    plus the per-class IoU (None for absent classes). With no garment pixels
    anywhere the masks agree completely and the mean is 1.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    tp = np.diag(matrix)
    union = matrix.sum(axis=0) + matrix.sum(axis=1) - tp
    per_class = {}
    scores = []
    for class_id in range(1, matrix.shape[0]):
        if union[class_id] > 0:
            iou = float(tp[class_id] / union[class_id])
            scores.append(iou)
            per_class[class_id] = iou
        else:
            per_class[class_id] = None
    return (float(np.mean(scores)) if scores else 1.0), per_class


def _success_rate(plan, scene):
    garments = set(int(c) for c in np.unique(scene.mask)) - {0}
    if not garments:
        return 1.0 if not plan else 0.0
    hits = {p.class_id for p in plan if p.class_id in garments and grasp_succeeds(p, scene.mask, scene.depth)}
    return len(hits) / len(garments)


def _evaluate_scene(model, scene, config):
    classes = model.hparams['classes']
    predicted = predict_mask(model, scene.rgb)
    matrix = confusion_matrix(scene.mask.ravel(), predicted.ravel(), labels=np.arange(classes))
    depth = prepare_depth(scene.depth, config)
    plan = plan_grasp_sequence(predicted, depth, k_fraction=config.grasp_k_fraction)
    center_plan = plan_grasp_sequence(predicted, depth, selector=select_center_grasp_point)
    record = {
        'seed': scene.spec.seed,
        'level': scene.spec.illumination,
        'mean_luma': scene.mean_luma,
        'band': luminance_band(scene.mean_luma),
        'gsr': _success_rate(plan, scene),
        'gsr_center': _success_rate(center_plan, scene),
    }
    return record, matrix


def _class_name(class_id):
    return settings.GARMENT_CLASSES.get(class_id, str(class_id))


def evaluate_model(model, groups, config, workers=None):
    """mIoU, per-class IoU, luminance-band breakdown and grasp success rates"""
    scenes = [scene for group in groups for scene in group]
    if not scenes:
        raise DataError('evaluation needs at least one scene')
    results = Parallel(n_jobs=workers or config.workers, prefer='threads')(
        delayed(_evaluate_scene)(model, scene, config) for scene in scenes
    )
    records = pd.DataFrame([record for record, _ in results])
    matrices = np.stack([matrix for _, matrix in results])

    miou, per_class = mean_iou(matrices.sum(axis=0))
    band_gsr = records.groupby('band')['gsr'].mean()
    bands = {}
    for band in LUMINANCE_BANDS:
        members = np.flatnonzero((records['band'] == band).to_numpy())
        if len(members) == 0:
            bands[band] = {'miou': None, 'mgsr': None, 'count': 0}
            continue
        band_miou, _ = mean_iou(matrices[members].sum(axis=0))
        bands[band] = {
            'miou': band_miou,
            'mgsr': float(band_gsr[band]),
            'count': int(len(members)),
        }
    summary = records.groupby('band')[['gsr', 'gsr_center']].mean()
    logger.info('evaluated %d scenes, band success rates:\n%s', len(records), summary)

    metrics = {
        'miou': miou,
        'per_class_iou': {_class_name(c): v for c, v in per_class.items()},
        'bands': bands,
        'mgsr': float(records['gsr'].mean()),
        'mgsr_center': float(records['gsr_center'].mean()),
        'scenes': int(len(records)),
    }
    return EvaluationMetricsSerializer(metrics).data


def record_evaluation(metrics, model_path, corpus_path, variant):
    try:
        return EvaluationReport.objects.create(
            model_path=str(model_path),
            corpus_path=str(corpus_path),
            variant=variant,
            miou=metrics['miou'],
            mgsr=metrics['mgsr'],
            mgsr_center=metrics['mgsr_center'],
            scenes=metrics['scenes'],
            metrics=metrics,
        )
    except DatabaseError as exc:
        logger.warning('could not record evaluation report: %s', exc)
        return None


def split_groups(groups, test_fraction=0.25, seed=0):
    """Seeded split of scene groups into train and test sets"""
    rng = check_random_state(seed)
    order = rng.permutation(len(groups))
    n_test = max(1, int(round(test_fraction * len(groups))))
    test = sorted(order[:n_test])
    train = sorted(order[n_test:])
    return [groups[i] for i in train], [groups[i] for i in test]


def compare_variants(config, train_groups, test_groups, seed, variants=('full', 'fixed_slot')):
    """Train every variant identically and evaluate each on the same test groups"""
    results = {}
    for variant in variants:
        variant_config = replace(config, variant=variant)
        model, _ = train_model(variant_config, train_groups, seed)
        results[variant] = evaluate_model(model, test_groups, variant_config)
        logger.info('variant %s: mIoU %.4f', variant, results[variant]['miou'])
    return results


def band_drop(metrics):
    """mIoU lost from the brightest to the darkest populated luminance band"""
    populated = [metrics['bands'][b]['miou'] for b in LUMINANCE_BANDS if metrics['bands'][b]['count']]
    if len(populated) < 2:
        return 0.0
    return populated[-1] - populated[0]


def inspect_model(model):
    """Curve bank summary and library statistics as a JSON-ready dict"""
    dump = {
        'hparams': model.hparams,
        'curve_bank': {
            'n_curves': model.bank.n_curves,
            'n_points': model.bank.n_points,
            'tau': model.bank.tau,
            'curve_means': [round(float(v), 6) for v in model.bank.curves().mean(axis=1)],
        },
        'luminance_library': model.lib_l.stats(),
        'structural_library': model.lib_s.stats(),
    }
    return ModelDumpSerializer(dump).data
