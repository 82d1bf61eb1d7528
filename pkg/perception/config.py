"""
Pipeline configuration
Defaults from settings.GRASPALL_DEFAULTS, overridden by a flat `key = value`
file and then by explicit overrides. Every value is validated before use.
"""
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from django.conf import settings

from .exceptions import ConfigError
from .ml_models.fusion import MODEL_KEYS
from .serializers import PipelineConfigSerializer


@dataclass(frozen=True)
class PipelineConfig:
    n_curves: int
    n_points: int
    tau: float
    plc_lr: float
    alpha: float
    channels: int
    patch: int
    classes: int
    lr: float
    epochs: int
    loss_weight_sc: float
    loss_weight_l1: float
    loss_weight_bce: float
    loss_weight_ce: float
    variant: str
    canny_sigma: float
    canny_low: float
    canny_high: float
    bilateral_window: int
    bilateral_sigma_s: float
    bilateral_sigma_i: float
    retinex_sigma: float
    enhance_depth: bool
    grasp_k_fraction: float
    fda_beta: float
    scene_width: int
    scene_height: int
    num_scenes: int
    levels: str
    max_garments: int
    depth_noise_sigma: float
    depth_hole_fraction: float
    workers: int

    @property
    def level_values(self):
        return [float(part) for part in self.levels.split(',') if part.strip()]

    def model_hparams(self):
        values = asdict(self)
        return {key: values[key] for key in MODEL_KEYS}

    def depth_params(self):
        return {
            'sigma_s': self.bilateral_sigma_s,
            'sigma_i': self.bilateral_sigma_i,
            'window': self.bilateral_window,
        }

    def as_dict(self):
        return asdict(self)


CONFIG_KEYS = tuple(f.name for f in fields(PipelineConfig))


def parse_config_text(text, source='<config>'):
    """`key = value` lines; `#` starts a comment, blank lines are ignored"""
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f'{source}:{number}: expected "key = value", got {raw.strip()!r}')
        if key in values:
            raise ConfigError(f'{source}:{number}: duplicate key {key!r}', key=key)
        values[key] = value.strip()
    return values


def _first_error(errors):
    key, messages = next(iter(errors.items()))
    if isinstance(messages, dict):
        return _first_error(messages)
    message = messages[0] if isinstance(messages, list) else messages
    return key, str(message)


def load_config(path=None, overrides=None):
    """Merge defaults, file and overrides into a validated PipelineConfig"""
    merged = dict(settings.GRASPALL_DEFAULTS)
    layers = []
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f'config file not found: {path}')
        layers.append(parse_config_text(path.read_text(), source=str(path)))
    layers.append({k: v for k, v in (overrides or {}).items() if v is not None})
    for layer in layers:
        for key, value in layer.items():
            if key not in CONFIG_KEYS:
                raise ConfigError(f'unknown config key {key!r}', key=key)
            merged[key] = value

    serializer = PipelineConfigSerializer(data=merged)
    if not serializer.is_valid():
        key, message = _first_error(serializer.errors)
        if key == 'non_field_errors':
            raise ConfigError(f'invalid config: {message}')
        raise ConfigError(f'invalid config value for {key!r}: {message}', key=key)
    return PipelineConfig(**serializer.validated_data)
