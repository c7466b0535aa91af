from django.conf import settings
from rest_framework import serializers

from graph.laplacian import AUTO
from main.exceptions import FmtcError
from orchestrator.admm import HyperParams

from .models import ExperimentRun

CONFIG_SCHEMA_VERSION = 1


def flatten_errors(detail, prefix=''):
    """Yield 'field.path: message' lines from a DRF error structure."""
    if isinstance(detail, dict):
        for key, value in detail.items():
            if key == 'non_field_errors':
                path = prefix
            else:
                path = f"{prefix}.{key}" if prefix else str(key)
            yield from flatten_errors(value, path)
    elif isinstance(detail, (list, tuple)):
        for item in detail:
            yield from flatten_errors(item, prefix)
    else:
        yield f"{prefix}: {detail}" if prefix else str(detail)


class StrictFieldsMixin:
    """Reject keys the serializer does not declare."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ['Unknown field.'] for key in unknown})
        return super().to_internal_value(data)


class SigmaField(serializers.Field):
    """Positive kernel width or the string 'auto'."""

    default_error_messages = {
        'invalid': f"Must be a positive number or '{AUTO}'.",
    }

    def to_internal_value(self, data):
        if isinstance(data, str) and data.strip().lower() == AUTO:
            return AUTO
        if isinstance(data, bool):
            self.fail('invalid')
        try:
            value = float(data)
        except (TypeError, ValueError):
            self.fail('invalid')
        if not value > 0:
            self.fail('invalid')
        return value

    def to_representation(self, value):
        return value


_HYPER_DEFAULTS = HyperParams()


class HyperParamsSerializer(StrictFieldsMixin, serializers.Serializer):
    alpha = serializers.FloatField(min_value=0, default=_HYPER_DEFAULTS.alpha)
    beta = serializers.FloatField(min_value=0, default=_HYPER_DEFAULTS.beta)
    rho = serializers.FloatField(default=_HYPER_DEFAULTS.rho)
    p = serializers.FloatField(default=_HYPER_DEFAULTS.p)
    clusters = serializers.IntegerField(min_value=2, default=_HYPER_DEFAULTS.clusters)
    knn_k = serializers.IntegerField(min_value=1, default=_HYPER_DEFAULTS.knn_k)
    sigma = SigmaField(default=_HYPER_DEFAULTS.sigma)
    eta = serializers.FloatField(default=_HYPER_DEFAULTS.eta)
    inner_iters = serializers.IntegerField(min_value=1, default=_HYPER_DEFAULTS.inner_iters)
    max_rounds = serializers.IntegerField(min_value=0, default=_HYPER_DEFAULTS.max_rounds)
    tol_primal = serializers.FloatField(default=_HYPER_DEFAULTS.tol_primal)
    tol_obj = serializers.FloatField(default=_HYPER_DEFAULTS.tol_obj)
    seed = serializers.IntegerField(default=lambda: settings.FMTC_DEFAULT_SEED)

    def validate_rho(self, value):
        if not value > 0:
            raise serializers.ValidationError('Must be positive.')
        return value

    def validate_p(self, value):
        if not 0 < value <= 1:
            raise serializers.ValidationError('Must lie in (0, 1].')
        return value

    def validate_eta(self, value):
        if not value > 0:
            raise serializers.ValidationError('Must be positive.')
        return value

    def validate_tol_primal(self, value):
        if not value > 0:
            raise serializers.ValidationError('Must be positive.')
        return value

    def validate_tol_obj(self, value):
        if not value > 0:
            raise serializers.ValidationError('Must be positive.')
        return value

    def validate(self, attrs):
        try:
            attrs['instance'] = HyperParams(**attrs)
        except FmtcError as e:
            raise serializers.ValidationError(str(e))
        return attrs


class RunConfigSerializer(StrictFieldsMixin, serializers.Serializer):
    """Versioned JSON run configuration."""

    schema_version = serializers.IntegerField()
    name = serializers.CharField(required=False, allow_blank=True, default='')
    data_paths = serializers.ListField(child=serializers.CharField(), min_length=1)
    label_paths = serializers.ListField(child=serializers.CharField(), required=False, allow_null=True, default=None)
    output_dir = serializers.CharField()
    test_fraction = serializers.FloatField(min_value=0.0, max_value=0.5, default=lambda: settings.FMTC_TEST_FRACTION)
    parallel = serializers.BooleanField(default=False)
    workers = serializers.IntegerField(min_value=1, default=lambda: settings.FMTC_MAX_WORKERS)
    record_wall_time = serializers.BooleanField(default=False)
    kmeans_restarts = serializers.IntegerField(min_value=1, default=lambda: settings.FMTC_KMEANS_RESTARTS)
    trace_metrics = serializers.BooleanField(default=False)
    baselines = serializers.BooleanField(default=False)
    hyperparameters = HyperParamsSerializer(default=dict)

    def validate_schema_version(self, value):
        if value != CONFIG_SCHEMA_VERSION:
            raise serializers.ValidationError(
                f"Unsupported schema version {value}; expected {CONFIG_SCHEMA_VERSION}."
            )
        return value

    def validate(self, attrs):
        labels = attrs.get('label_paths')
        if labels is not None and len(labels) != len(attrs['data_paths']):
            raise serializers.ValidationError({
                'label_paths': [f"Expected {len(attrs['data_paths'])} entries, one per data path; got {len(labels)}."]
            })
        if attrs.get('hyperparameters') in (None, {}):
            attrs['hyperparameters'] = {'instance': HyperParams(seed=settings.FMTC_DEFAULT_SEED)}
        return attrs


class SyntheticSpecSerializer(StrictFieldsMixin, serializers.Serializer):
    clients = serializers.IntegerField(min_value=1)
    clusters = serializers.IntegerField(min_value=1)
    features = serializers.IntegerField(min_value=1)
    samples = serializers.IntegerField(min_value=1)
    separation = serializers.FloatField()
    mean_shift = serializers.FloatField(min_value=0.0, default=0.0)
    seed = serializers.IntegerField(default=lambda: settings.FMTC_DEFAULT_SEED)

    def validate_separation(self, value):
        if not value > 0:
            raise serializers.ValidationError('Must be positive.')
        return value

    def validate(self, attrs):
        if attrs['clusters'] > attrs['samples']:
            raise serializers.ValidationError({
                'clusters': [f"Cannot exceed samples per client ({attrs['samples']})."]
            })
        return attrs


class ExperimentRunSerializer(serializers.ModelSerializer):
    """Serializer for ExperimentRun model."""

    status_display = serializers.CharField(source='get_status_display', read_only=True)

    class Meta:
        model = ExperimentRun
        fields = [
            'id', 'name', 'status', 'status_display', 'config', 'output_dir',
            'rounds_completed', 'converged', 'final_primal_residual', 'metrics',
            'error_message', 'created_at', 'completed_at'
        ]
        read_only_fields = fields
