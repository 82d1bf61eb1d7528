"""
Illumination-conditioned RGB-depth fusion
Patch-linear encoders/decoders, cross-attention compensation, the mask head,
the three training procedures (luminance alignment, structure modeling,
mask prediction) and the inference path.

Feature maps are (gh, gw, C) arrays. Every trainable component exposes
forward/backward with analytic gradients; each training stage steps its
tensors with scikit-learn's Adam optimizer.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_softmax, softmax
from sklearn.neural_network._stochastic_optimizers import AdamOptimizer
from sklearn.utils import check_random_state

from ..exceptions import DataError, LibraryError, NumericError
from ..imageproc import DepthMap, canny, histogram_descriptor, retinex_decompose, rgb_to_luma
from .curve_bank import init_curve_bank, match_hard, plc_sgd_step, spectral_consistency_grad
from .response_library import ResponseLibrary

logger = logging.getLogger(__name__)

VARIANTS = ('full', 'fixed_slot', 'no_lrl', 'no_srl', 'no_sc', 'no_bce', 'no_library')

MODEL_KEYS = (
    'n_curves', 'n_points', 'tau', 'alpha', 'channels', 'patch', 'classes', 'variant',
    'retinex_sigma', 'canny_sigma', 'canny_low', 'canny_high',
    'loss_weight_sc', 'loss_weight_l1', 'loss_weight_bce', 'loss_weight_ce',
)


def _as_channels(image):
    if isinstance(image, DepthMap):
        image = depth_plane(image)
    image = np.asarray(image, dtype=np.float64)
    return image[..., None] if image.ndim == 2 else image


def depth_plane(d):
    """Depth normalized to [0, 1] over valid pixels, holes at 0"""
    valid = ~d.holes
    plane = np.zeros(d.shape)
    if valid.any():
        values = d.depth[valid]
        low, span = values.min(), values.max() - values.min()
        if span > 0:
            plane[valid] = (values - low) / span
    return plane


def patchify(image, patch):
    """(H, W, c) -> (gh, gw, patch * patch * c), reflect-padding ragged edges"""
    h, w, c = image.shape
    pad_h, pad_w = -h % patch, -w % patch
    if pad_h or pad_w:
        image = np.pad(image, ((0, pad_h), (0, pad_w), (0, 0)), mode='reflect')
    gh, gw = image.shape[0] // patch, image.shape[1] // patch
    cells = image.reshape(gh, patch, gw, patch, c).transpose(0, 2, 1, 3, 4)
    return cells.reshape(gh, gw, patch * patch * c)


def unpatchify(cells, patch, channels):
    """(gh, gw, patch * patch * c) -> (gh * patch, gw * patch, c)"""
    gh, gw, _ = cells.shape
    image = cells.reshape(gh, gw, patch, patch, channels).transpose(0, 2, 1, 3, 4)
    return image.reshape(gh * patch, gw * patch, channels)


def _normal(rng, fan_in, shape):
    return rng.standard_normal(shape) / np.sqrt(fan_in)


@dataclass
class PatchEncoder:
    """Non-overlapping patches flattened and projected to C channels"""
    weight: np.ndarray
    bias: np.ndarray
    patch: int

    @classmethod
    def initialize(cls, patch, in_channels, channels, rng):
        fan_in = patch * patch * in_channels
        return cls(_normal(rng, fan_in, (fan_in, channels)), np.zeros(channels), patch)

    @property
    def in_channels(self):
        return self.weight.shape[0] // (self.patch * self.patch)

    def parameters(self):
        return {'weight': self.weight, 'bias': self.bias}

    def forward(self, image):
        patches = patchify(_as_channels(image), self.patch)
        if patches.shape[-1] != self.weight.shape[0]:
            raise DataError(
                f'encoder expects {self.in_channels} input channels, got image of shape {np.shape(image)}'
            )
        return patches @ self.weight + self.bias, patches

    def backward(self, d_features, patches):
        flat = patches.reshape(-1, patches.shape[-1])
        d_flat = d_features.reshape(-1, d_features.shape[-1])
        return {'weight': flat.T @ d_flat, 'bias': d_flat.sum(axis=0)}


@dataclass
class PatchDecoder:
    """Per-cell linear projection from C channels back to patch pixels"""
    weight: np.ndarray
    bias: np.ndarray
    patch: int

    @classmethod
    def initialize(cls, patch, channels, out_channels, rng):
        fan_out = patch * patch * out_channels
        return cls(_normal(rng, channels, (channels, fan_out)), np.zeros(fan_out), patch)

    @property
    def out_channels(self):
        return self.weight.shape[1] // (self.patch * self.patch)

    def parameters(self):
        return {'weight': self.weight, 'bias': self.bias}

    def forward(self, features):
        return features @ self.weight + self.bias

    def backward(self, d_cells, features):
        flat = features.reshape(-1, features.shape[-1])
        d_flat = d_cells.reshape(-1, d_cells.shape[-1])
        grads = {'weight': flat.T @ d_flat, 'bias': d_flat.sum(axis=0)}
        return grads, (d_flat @ self.weight.T).reshape(features.shape)


def encode(image, enc):
    """Image, gray map or DepthMap -> (gh, gw, C) feature map"""
    features, _ = enc.forward(image)
    return features


def decode(features, dec, activation='sigmoid'):
    """Feature map -> image-like array of shape (gh * patch, gw * patch, c)"""
    logits = unpatchify(dec.forward(features), dec.patch, dec.out_channels)
    return expit(logits) if activation == 'sigmoid' else logits


@dataclass
class AttentionProjections:
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray

    @classmethod
    def initialize(cls, channels, rng):
        return cls(*(_normal(rng, channels, (channels, channels)) for _ in range(3)))

    @property
    def channels(self):
        return self.wq.shape[0]

    def parameters(self):
        return {'wq': self.wq, 'wk': self.wk, 'wv': self.wv}

    def forward(self, query, kv):
        kv = np.asarray(kv, dtype=np.float64)
        query = np.asarray(query, dtype=np.float64)
        channels = self.channels
        if kv.shape[-1] != channels or query.shape[-1] != channels:
            raise DataError(
                f'attention expects {channels} channels, got query {query.shape} and kv {kv.shape}'
            )
        kv_flat = kv.reshape(-1, channels)
        broadcast = query.ndim == 1
        if broadcast:
            grid = kv.shape[:-1]
            q_flat = np.broadcast_to(query, kv_flat.shape)
        else:
            grid = query.shape[:-1]
            q_flat = query.reshape(-1, channels)
        q = q_flat @ self.wq
        k = kv_flat @ self.wk
        v = kv_flat @ self.wv
        scores = softmax(q @ k.T / np.sqrt(channels), axis=1)
        out = (scores @ v).reshape(*grid, channels)
        cache = (q_flat, kv_flat, q, k, v, scores, broadcast, query.shape, kv.shape)
        return out, scores, cache

    def backward(self, d_out, cache):
        q_flat, kv_flat, q, k, v, scores, broadcast, query_shape, kv_shape = cache
        scale = np.sqrt(self.channels)
        d_out = d_out.reshape(-1, self.channels)
        d_v = scores.T @ d_out
        d_scores = d_out @ v.T
        d_logits = scores * (d_scores - (d_scores * scores).sum(axis=1, keepdims=True)) / scale
        d_q = d_logits @ k
        d_k = d_logits.T @ q
        grads = {'wq': q_flat.T @ d_q, 'wk': kv_flat.T @ d_k, 'wv': kv_flat.T @ d_v}
        d_query = d_q @ self.wq.T
        d_query = d_query.sum(axis=0) if broadcast else d_query.reshape(query_shape)
        d_kv = (d_k @ self.wk.T + d_v @ self.wv.T).reshape(kv_shape)
        return grads, d_query, d_kv


def cross_attention(query, kv, proj):
    """
    Scaled dot-product attention of `query` over `kv`.

    A 1-D query is broadcast to every kv position. Returns the attended
    feature map on the query grid and the (rows x kv positions) score matrix.
    """
    out, scores, _ = proj.forward(query, kv)
    return out, scores


@dataclass
class LibraryProjection:
    """
    Compensation of a feature map by one library row: the projected row is
    broadcast to every cell. Attention over a single key row reduces to
    exactly this value projection.
    """
    wv: np.ndarray

    @classmethod
    def initialize(cls, channels, rng):
        return cls(_normal(rng, channels, (channels, channels)))

    @property
    def channels(self):
        return self.wv.shape[0]

    def parameters(self):
        return {'wv': self.wv}

    def forward(self, features, row):
        features = np.asarray(features, dtype=np.float64)
        row = np.asarray(row, dtype=np.float64).reshape(-1)
        if row.shape[0] != self.channels or features.shape[-1] != self.channels:
            raise DataError(
                f'library projection expects {self.channels} channels, got features '
                f'{features.shape} and row {row.shape}'
            )
        out = np.broadcast_to(row @ self.wv, features.shape).copy()
        return out, row

    def backward(self, d_out, row):
        d_value = d_out.reshape(-1, self.channels).sum(axis=0)
        return {'wv': np.outer(row, d_value)}


@dataclass
class MaskHead:
    """MLP over concatenated structure/luminance features, then class logits per cell"""
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @classmethod
    def initialize(cls, channels, classes, rng):
        if classes < 2:
            raise DataError(f'mask head needs at least 2 classes, got {classes}')
        return cls(
            _normal(rng, 2 * channels, (2 * channels, channels)), np.zeros(channels),
            _normal(rng, channels, (channels, classes)), np.zeros(classes),
        )

    @property
    def classes(self):
        return self.w2.shape[1]

    def parameters(self):
        return {'w1': self.w1, 'b1': self.b1, 'w2': self.w2, 'b2': self.b2}

    def forward(self, x):
        pre = x @ self.w1 + self.b1
        hidden = np.maximum(pre, 0.0)
        return hidden @ self.w2 + self.b2, (x, pre, hidden)

    def backward(self, d_logits, cache):
        x, pre, hidden = cache
        d_hidden = d_logits @ self.w2.T
        d_pre = d_hidden * (pre > 0)
        grads = {
            'w1': x.T @ d_pre, 'b1': d_pre.sum(axis=0),
            'w2': hidden.T @ d_logits, 'b2': d_logits.sum(axis=0),
        }
        return grads, d_pre @ self.w1.T


class GarmentPerceptionModel:
    """Curve bank, response libraries and the fusion network, trained together"""

    COMPONENTS = (
        'enc_rgb', 'dec_rgb', 'enc_depth', 'dec_struct', 'attn_struct',
        'enc_struct', 'attn_lum', 'attn_str', 'head',
    )

    def __init__(self, hparams, bank, lib_l, lib_s, components):
        self.hparams = dict(hparams)
        if self.variant not in VARIANTS:
            raise DataError(f'unknown model variant {self.variant!r}')
        self.bank = bank
        self.lib_l = lib_l
        self.lib_s = lib_s
        self.components = components

    @classmethod
    def initialize(cls, hparams, seed):
        missing = [key for key in MODEL_KEYS if key not in hparams]
        if missing:
            raise DataError(f'model hyperparameters missing: {", ".join(missing)}')
        hparams = {key: hparams[key] for key in MODEL_KEYS}
        rng = check_random_state(seed)
        n, c, p = hparams['n_curves'], hparams['channels'], hparams['patch']
        bank = init_curve_bank(n, hparams['n_points'], seed=seed, tau=hparams['tau'])
        components = {
            'enc_rgb': PatchEncoder.initialize(p, 3, c, rng),
            'dec_rgb': PatchDecoder.initialize(p, c, 3, rng),
            'enc_depth': PatchEncoder.initialize(p, 1, c, rng),
            'dec_struct': PatchDecoder.initialize(p, c, 1, rng),
            'attn_struct': AttentionProjections.initialize(c, rng),
            'enc_struct': PatchEncoder.initialize(p, 1, c, rng),
            'attn_lum': LibraryProjection.initialize(c, rng),
            'attn_str': LibraryProjection.initialize(c, rng),
            'head': MaskHead.initialize(c, hparams['classes'], rng),
        }
        return cls(
            hparams, bank,
            ResponseLibrary(n, c, hparams['alpha']),
            ResponseLibrary(n, c, hparams['alpha']),
            components,
        )

    def __getattr__(self, name):
        components = self.__dict__.get('components', {})
        if name in components:
            return components[name]
        raise AttributeError(name)

    @property
    def variant(self):
        return self.hparams['variant']

    @property
    def channels(self):
        return self.hparams['channels']

    @property
    def indexes_by_curve(self):
        return self.variant != 'fixed_slot'

    @property
    def updates_curves(self):
        return self.variant not in ('fixed_slot', 'no_sc')

    @property
    def queries_luminance_library(self):
        return self.variant != 'no_lrl'

    @property
    def enhances_luminance(self):
        return self.variant not in ('no_lrl', 'no_library')

    @property
    def enhances_structure(self):
        return self.variant not in ('no_srl', 'no_library')

    @property
    def trains_structure(self):
        return self.variant != 'no_bce'

    def parameters(self):
        """Flat name -> array view of every trainable tensor"""
        return {
            f'{name}.{key}': value
            for name in self.COMPONENTS
            for key, value in self.components[name].parameters().items()
        }

    def optimizer(self, lr):
        return StageOptimizer(self, lr)

    def histogram(self, rgb):
        return histogram_descriptor(rgb_to_luma(rgb), self.bank.n_points)

    def slot_for(self, histogram):
        """Curve id used to address both libraries"""
        if not self.indexes_by_curve:
            return 0
        return match_hard(self.bank, histogram).hard_id

    def quantize(self):
        """Snap all state to float32 storage precision"""
        for value in self.parameters().values():
            value[...] = value.astype('<f4')
        self.bank = self.bank.quantized()
        self.lib_l.quantize()
        self.lib_s.quantize()
        return self


class StageOptimizer:
    """
    Adam over the tensors one training stage updates, in place on the model.

    The tensor set is fixed by the first gradient dict the stage produces.
    """

    def __init__(self, model, lr):
        self.model = model
        self.lr = float(lr)
        self.names = None
        self._adam = None

    def step(self, grads):
        for name, grad in grads.items():
            if not np.all(np.isfinite(grad)):
                raise NumericError(f'non-finite gradient for {name}')
        if self.lr == 0:
            return
        params = self.model.parameters()
        if self._adam is None:
            self.names = sorted(grads)
            self._adam = AdamOptimizer([params[name] for name in self.names], learning_rate_init=self.lr)
        self._adam.update_params(
            [params[name] for name in self.names],
            [grads.get(name, np.zeros_like(params[name])) for name in self.names],
        )


def _pooled(features):
    return features.reshape(-1, features.shape[-1]).mean(axis=0)


def _crop_grad(d_image, padded_shape):
    padded = np.zeros(padded_shape)
    padded[:d_image.shape[0], :d_image.shape[1]] = d_image
    return padded


def alignment_step(model, image, target):
    """L1 restoration loss of decode(encode(image)) against the brightest exposure"""
    enc, dec = model.enc_rgb, model.dec_rgb
    target = np.asarray(target, dtype=np.float64)
    h, w = target.shape[:2]
    features, patches = enc.forward(image)
    logits = unpatchify(dec.forward(features), dec.patch, 3)
    pred = expit(logits[:h, :w])
    diff = pred - target
    loss = float(np.abs(diff).mean())

    d_pred = np.sign(diff) / diff.size * model.hparams['loss_weight_l1']
    d_logits = _crop_grad(d_pred * pred * (1.0 - pred), logits.shape)
    dec_grads, d_features = dec.backward(patchify(d_logits, dec.patch), features)
    enc_grads = enc.backward(d_features, patches)
    grads = {f'dec_rgb.{k}': v for k, v in dec_grads.items()}
    grads.update({f'enc_rgb.{k}': v for k, v in enc_grads.items()})
    return loss, grads, features


def structure_step(model, query, depth, target):
    """
    BCE of the decoded structure map against a Canny map.

    The luminance slot queries the depth features; the attended features are
    added back to the depth features before decoding.
    """
    enc, dec, attn = model.enc_depth, model.dec_struct, model.attn_struct
    target = np.asarray(target, dtype=np.float64)
    h, w = target.shape
    depth_features, patches = enc.forward(depth)
    attended, _, cache = attn.forward(query, depth_features)
    fused = depth_features + attended
    logits_full = unpatchify(dec.forward(fused), dec.patch, 1)
    logits = logits_full[:h, :w, 0]
    loss = float((np.logaddexp(0.0, logits) - target * logits).mean())

    d_logits = (expit(logits) - target) / target.size * model.hparams['loss_weight_bce']
    d_logits = _crop_grad(d_logits[..., None], logits_full.shape)
    dec_grads, d_fused = dec.backward(patchify(d_logits, dec.patch), fused)
    attn_grads, _, d_kv = attn.backward(d_fused, cache)
    enc_grads = enc.backward(d_fused + d_kv, patches)
    grads = {f'dec_struct.{k}': v for k, v in dec_grads.items()}
    grads.update({f'attn_struct.{k}': v for k, v in attn_grads.items()})
    grads.update({f'enc_depth.{k}': v for k, v in enc_grads.items()})
    return loss, grads, fused


def _cell_class_counts(mask, patch, classes):
    mask = np.asarray(mask)
    pad_h, pad_w = -mask.shape[0] % patch, -mask.shape[1] % patch
    padded = np.pad(mask.astype(np.int64), ((0, pad_h), (0, pad_w)), constant_values=-1)
    cells = patchify(padded[..., None], patch)
    return np.stack([(cells == c).sum(axis=-1) for c in range(classes)], axis=-1).astype(np.float64)


def _mask_forward(model, decomposition, m_l, m_s):
    luminance_features, lum_patches = model.enc_rgb.forward(decomposition.luminance)
    structure_features, str_patches = model.enc_struct.forward(decomposition.structure)
    lum_cache = str_cache = None
    lum_en, str_en = luminance_features, structure_features
    if model.enhances_luminance:
        attended, lum_cache = model.attn_lum.forward(luminance_features, m_l)
        lum_en = luminance_features + attended
    if model.enhances_structure:
        attended, str_cache = model.attn_str.forward(structure_features, m_s)
        str_en = structure_features + attended
    grid = luminance_features.shape[:2]
    x = np.concatenate([str_en, lum_en], axis=-1).reshape(-1, 2 * model.channels)
    logits, head_cache = model.head.forward(x)
    caches = (lum_patches, str_patches, lum_cache, str_cache, head_cache, grid)
    return logits.reshape(*grid, -1), caches


def mask_step(model, decomposition, m_l, m_s, mask):
    """Cross-entropy of cell logits, upsampled to pixels, against the label mask"""
    classes = model.head.classes
    mask = np.asarray(mask)
    if mask.size and mask.max() >= classes:
        raise DataError(f'mask contains class id {int(mask.max())} but the head has {classes} classes')
    logits, caches = _mask_forward(model, decomposition, m_l, m_s)
    lum_patches, str_patches, lum_cache, str_cache, head_cache, grid = caches
    counts = _cell_class_counts(mask, model.enc_rgb.patch, classes).reshape(-1, classes)
    flat_logits = logits.reshape(-1, classes)
    log_probs = log_softmax(flat_logits, axis=1)
    pixels = mask.size
    loss = float(-(counts * log_probs).sum() / pixels)

    probs = np.exp(log_probs)
    d_logits = (probs * counts.sum(axis=1, keepdims=True) - counts) / pixels
    d_logits *= model.hparams['loss_weight_ce']
    head_grads, d_x = model.head.backward(d_logits, head_cache)
    channels = model.channels
    d_str = d_x[:, :channels].reshape(*grid, channels)
    d_lum = d_x[:, channels:].reshape(*grid, channels)
    grads = {f'head.{k}': v for k, v in head_grads.items()}
    if lum_cache is not None:
        grads.update({f'attn_lum.{k}': v for k, v in model.attn_lum.backward(d_lum, lum_cache).items()})
    if str_cache is not None:
        grads.update({f'attn_str.{k}': v for k, v in model.attn_str.backward(d_str, str_cache).items()})
    grads.update({f'enc_rgb.{k}': v for k, v in model.enc_rgb.backward(d_lum, lum_patches).items()})
    grads.update({f'enc_struct.{k}': v for k, v in model.enc_struct.backward(d_str, str_patches).items()})
    return loss, grads


def _brightest(group):
    lumas = [scene.mean_luma for scene in group]
    return group[int(np.argmax(lumas))]


def train_luminance_alignment(model, groups, epochs, lr, plc_lr=0.01):
    """
    Restore every exposure of a scene toward its brightest exposure, write the
    pooled encoder features into the luminance library at the matched curve id
    and move the curves along the spectral consistency gradient.

    Returns the mean L1 loss per epoch.
    """
    history = []
    usable = []
    for index, group in enumerate(groups):
        if len(group) < 2:
            logger.warning('alignment group %d has a single exposure, skipped', index)
            continue
        usable.append((_brightest(group), group))

    weight_sc = model.hparams['loss_weight_sc']
    optimizer = model.optimizer(lr)
    for epoch in range(epochs):
        losses, sc_losses = [], []
        for reference, group in usable:
            for scene in group:
                histogram = model.histogram(scene.rgb)
                slot = model.slot_for(histogram)
                loss, grads, features = alignment_step(model, scene.rgb, reference.rgb)
                optimizer.step(grads)
                pooled = _pooled(features)
                if model.updates_curves and not model.lib_l.is_empty:
                    sc_loss, curve_grad = spectral_consistency_grad(
                        model.bank, histogram, pooled, model.lib_l
                    )
                    model.bank = plc_sgd_step(model.bank, weight_sc * curve_grad, plc_lr)
                    sc_losses.append(sc_loss)
                model.lib_l.ema_update(slot, pooled)
                losses.append(loss)
        mean_loss = float(np.mean(losses)) if losses else 0.0
        history.append(mean_loss)
        logger.info(
            'alignment epoch %d/%d: l1=%.5f sc=%.5f', epoch + 1, epochs, mean_loss,
            float(np.mean(sc_losses)) if sc_losses else 0.0,
        )
    return history


def structure_targets(model, groups):
    """Canny map of each group's brightest exposure"""
    hp = model.hparams
    return [
        canny(rgb_to_luma(_brightest(group).rgb), hp['canny_sigma'], hp['canny_low'], hp['canny_high'])
        for group in groups
    ]


def train_structure(model, groups, epochs, lr, targets=None):
    """
    Decode illumination-conditioned depth features into the brightest
    exposure's Canny map and write the pooled fused features into the
    structural library. Returns the mean BCE per epoch.
    """
    if model.queries_luminance_library and model.lib_l.is_empty:
        raise LibraryError('structure modeling needs a populated luminance library')
    if targets is None:
        targets = structure_targets(model, groups)
    if len(targets) != len(groups):
        raise DataError('every structure group needs a Canny target')

    history = []
    zero_query = np.zeros(model.channels)
    optimizer = model.optimizer(lr)
    for epoch in range(epochs):
        losses = []
        for group, edges in zip(groups, targets):
            if edges is None:
                raise DataError('missing Canny target for a structure group')
            edges = edges.astype(np.float64)
            for scene in group:
                slot = model.slot_for(model.histogram(scene.rgb))
                query = (
                    model.lib_l.read_slot(slot, fallback=True)
                    if model.queries_luminance_library else zero_query
                )
                loss, grads, fused = structure_step(model, query, scene.depth, edges)
                if model.trains_structure:
                    optimizer.step(grads)
                model.lib_s.ema_update(slot, _pooled(fused))
                losses.append(loss)
        mean_loss = float(np.mean(losses)) if losses else 0.0
        history.append(mean_loss)
        logger.info('structure epoch %d/%d: bce=%.5f', epoch + 1, epochs, mean_loss)
    return history


def _library_reads(model, slot):
    m_l = m_s = np.zeros(model.channels)
    if model.enhances_luminance:
        m_l = model.lib_l.read_slot(slot, fallback=True)
    if model.enhances_structure:
        m_s = model.lib_s.read_slot(slot, fallback=True)
    return m_l, m_s


def _check_libraries(model):
    if model.enhances_luminance and model.lib_l.is_empty:
        raise LibraryError('luminance library is empty; train the model first')
    if model.enhances_structure and model.lib_s.is_empty:
        raise LibraryError('structural library is empty; train the model first')


def train_mask(model, scenes, epochs, lr):
    """Fit the mask head, attention projections and encoders with cross-entropy"""
    _check_libraries(model)
    sigma = model.hparams['retinex_sigma']
    prepared = []
    for scene in scenes:
        slot = model.slot_for(model.histogram(scene.rgb))
        prepared.append((retinex_decompose(scene.rgb, sigma), slot, scene.mask))

    history = []
    optimizer = model.optimizer(lr)
    for epoch in range(epochs):
        losses = []
        for decomposition, slot, mask in prepared:
            m_l, m_s = _library_reads(model, slot)
            loss, grads = mask_step(model, decomposition, m_l, m_s, mask)
            optimizer.step(grads)
            losses.append(loss)
        mean_loss = float(np.mean(losses)) if losses else 0.0
        history.append(mean_loss)
        logger.info('mask epoch %d/%d: ce=%.5f', epoch + 1, epochs, mean_loss)
    return history


def predict_mask(model, rgb):
    """Per-pixel class map; argmax ties go to the lowest class id"""
    _check_libraries(model)
    rgb = np.asarray(rgb, dtype=np.float64)
    h, w = rgb.shape[:2]
    slot = model.slot_for(model.histogram(rgb))
    m_l, m_s = _library_reads(model, slot)
    decomposition = retinex_decompose(rgb, model.hparams['retinex_sigma'])
    logits, _ = _mask_forward(model, decomposition, m_l, m_s)
    labels = np.argmax(logits, axis=-1)
    patch = model.enc_rgb.patch
    return np.repeat(np.repeat(labels, patch, axis=0), patch, axis=1)[:h, :w].astype(np.int64)
