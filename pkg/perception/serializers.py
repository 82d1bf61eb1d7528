"""
Serializers for every JSON document the pipeline reads or writes:
configuration, grasp plans, scene metadata, evaluation metrics and model dumps.
"""
import json

from rest_framework import serializers

from .ml_models.fusion import VARIANTS


class PipelineConfigSerializer(serializers.Serializer):
    """Validates a merged configuration against each module's preconditions"""
    n_curves = serializers.IntegerField(min_value=1)
    n_points = serializers.IntegerField(min_value=2)
    tau = serializers.FloatField()
    plc_lr = serializers.FloatField(min_value=0.0)
    alpha = serializers.FloatField()
    channels = serializers.IntegerField(min_value=1)
    patch = serializers.IntegerField(min_value=1)
    classes = serializers.IntegerField(min_value=2, max_value=256)
    lr = serializers.FloatField(min_value=0.0)
    epochs = serializers.IntegerField(min_value=0)
    loss_weight_sc = serializers.FloatField(min_value=0.0)
    loss_weight_l1 = serializers.FloatField(min_value=0.0)
    loss_weight_bce = serializers.FloatField(min_value=0.0)
    loss_weight_ce = serializers.FloatField(min_value=0.0)
    variant = serializers.ChoiceField(choices=VARIANTS)
    canny_sigma = serializers.FloatField()
    canny_low = serializers.FloatField(min_value=0.0, max_value=1.0)
    canny_high = serializers.FloatField(min_value=0.0, max_value=1.0)
    bilateral_window = serializers.IntegerField(min_value=3)
    bilateral_sigma_s = serializers.FloatField()
    bilateral_sigma_i = serializers.FloatField()
    retinex_sigma = serializers.FloatField()
    enhance_depth = serializers.BooleanField()
    grasp_k_fraction = serializers.FloatField()
    fda_beta = serializers.FloatField(min_value=0.0, max_value=0.5)
    scene_width = serializers.IntegerField(min_value=1)
    scene_height = serializers.IntegerField(min_value=1)
    num_scenes = serializers.IntegerField(min_value=1)
    levels = serializers.CharField()
    max_garments = serializers.IntegerField(min_value=1, max_value=8)
    depth_noise_sigma = serializers.FloatField(min_value=0.0)
    depth_hole_fraction = serializers.FloatField(min_value=0.0)
    workers = serializers.IntegerField()

    def _positive(self, value):
        if value <= 0:
            raise serializers.ValidationError('must be positive')
        return value

    validate_tau = _positive
    validate_canny_sigma = _positive
    validate_bilateral_sigma_s = _positive
    validate_bilateral_sigma_i = _positive
    validate_retinex_sigma = _positive

    def validate_alpha(self, value):
        if not 0 < value < 1:
            raise serializers.ValidationError('must lie in (0, 1)')
        return value

    def validate_bilateral_window(self, value):
        if value % 2 == 0:
            raise serializers.ValidationError('must be odd')
        return value

    def validate_grasp_k_fraction(self, value):
        if not 0 < value <= 1:
            raise serializers.ValidationError('must lie in (0, 1]')
        return value

    def validate_depth_hole_fraction(self, value):
        if value >= 1:
            raise serializers.ValidationError('must be below 1')
        return value

    def validate_workers(self, value):
        if value == 0:
            raise serializers.ValidationError('must be non-zero (negative counts from the CPU total)')
        return value

    def validate_levels(self, value):
        try:
            levels = [float(part) for part in value.split(',') if part.strip()]
        except ValueError:
            raise serializers.ValidationError('must be a comma-separated list of numbers')
        if not levels or any(not 0 <= level <= 1 for level in levels):
            raise serializers.ValidationError('needs at least one level, each in [0, 1]')
        return value

    def validate(self, attrs):
        if attrs['canny_low'] >= attrs['canny_high']:
            raise serializers.ValidationError({'canny_low': 'must be below canny_high'})
        return attrs


class GraspPointSerializer(serializers.Serializer):
    row = serializers.IntegerField()
    col = serializers.IntegerField()
    depth_m = serializers.FloatField()

    def get_fields(self):
        # "class" is a keyword, so the field cannot be declared as an attribute
        fields = super().get_fields()
        return {'class': serializers.IntegerField(source='class_id'), **fields}


class SceneSpecSerializer(serializers.Serializer):
    seed = serializers.IntegerField()
    width = serializers.IntegerField(min_value=1)
    height = serializers.IntegerField(min_value=1)
    garment_count = serializers.IntegerField(min_value=0, max_value=8)
    classes = serializers.ListField(child=serializers.IntegerField(min_value=1, max_value=8))
    illumination = serializers.FloatField(min_value=0.0, max_value=1.0)


class DegradeParamsSerializer(serializers.Serializer):
    gamma = serializers.FloatField()
    gain = serializers.FloatField()
    black_crush = serializers.FloatField()
    color_temp_shift = serializers.FloatField()
    noise_sigma = serializers.FloatField()
    blur_sigma = serializers.FloatField()


class SceneMetaSerializer(serializers.Serializer):
    spec = SceneSpecSerializer()
    params = DegradeParamsSerializer()
    mean_luma = serializers.FloatField(min_value=0.0, max_value=255.0)
    band = serializers.CharField()
    depth_noise_sigma = serializers.FloatField(min_value=0.0)
    depth_hole_fraction = serializers.FloatField(min_value=0.0)


class BandMetricsSerializer(serializers.Serializer):
    miou = serializers.FloatField(allow_null=True)
    mgsr = serializers.FloatField(allow_null=True)
    count = serializers.IntegerField()


class EvaluationMetricsSerializer(serializers.Serializer):
    miou = serializers.FloatField()
    per_class_iou = serializers.DictField(child=serializers.FloatField(allow_null=True))
    bands = serializers.DictField(child=BandMetricsSerializer())
    mgsr = serializers.FloatField()
    mgsr_center = serializers.FloatField()
    scenes = serializers.IntegerField()


class CurveBankSerializer(serializers.Serializer):
    n_curves = serializers.IntegerField()
    n_points = serializers.IntegerField()
    tau = serializers.FloatField()
    curve_means = serializers.ListField(child=serializers.FloatField())


class LibraryStatsSerializer(serializers.Serializer):
    n_slots = serializers.IntegerField()
    dim = serializers.IntegerField()
    alpha = serializers.FloatField()
    initialized = serializers.ListField(child=serializers.BooleanField())
    slot_norms = serializers.ListField(child=serializers.FloatField())


class ModelDumpSerializer(serializers.Serializer):
    hparams = serializers.DictField()
    curve_bank = CurveBankSerializer()
    luminance_library = LibraryStatsSerializer()
    structural_library = LibraryStatsSerializer()


def render_json(data):
    """Stable JSON text for documents written by the commands"""
    return json.dumps(data, indent=2) + '\n'


def render_grasp_plan(plan):
    return render_json(GraspPointSerializer(plan, many=True).data)
