import math
from typing import Any, Dict, List, Mapping, Tuple

from django.conf import settings
from rest_framework import serializers
from rest_framework.fields import empty

from .models import ExperimentRecord
from .services.analytics import BASELINES
from .services.tasks import FAMILIES, GENERATORS
from .services.training import TRAINABLE

TRAINED_METHODS = ('vqc', 'ea-vqc', 'reduced-vqc')
METHODS = TRAINED_METHODS + BASELINES + ('theorem2-bound', 'threshold-asymptotic')
AXES = ('epsilon', 'delta', 'energy')


class StrictSerializer(serializers.Serializer):
    """
    Serializer that rejects keys it does not declare and fills nested
    sections left out of the input with their own defaults.
    """

    def to_internal_value(self, data):
        if isinstance(data, Mapping):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError({key: ['Unknown key.'] for key in unknown})
            data = dict(data)
            for name, field in self.fields.items():
                if name not in data and isinstance(field, StrictSerializer) and field.default is empty:
                    data[name] = {}
        return super().to_internal_value(data)


class AtomClassSerializer(StrictSerializer):
    atoms = serializers.ListField(child=serializers.ListField(child=serializers.FloatField(), min_length=2),
                                  allow_empty=False)
    weights = serializers.ListField(child=serializers.FloatField(min_value=0), allow_null=True, default=None)

    def validate(self, attrs):
        widths = {len(point) for point in attrs['atoms']}
        if len(widths) != 1 or widths.pop() % 2:
            raise serializers.ValidationError({'atoms': ['Atoms need one even-length coordinate list each.']})
        if attrs['weights'] is not None and len(attrs['weights']) != len(attrs['atoms']):
            raise serializers.ValidationError({'weights': ['One weight per atom is required.']})
        return attrs


class TaskSerializer(StrictSerializer):
    family = serializers.ChoiceField(choices=FAMILIES, default=FAMILIES[0])
    epsilon = serializers.FloatField(min_value=0, default=0.5)
    delta = serializers.FloatField(min_value=0, default=0.0)
    atoms = serializers.IntegerField(min_value=4, allow_null=True, default=None)
    nodes_per_axis = serializers.IntegerField(min_value=1, allow_null=True, default=None)
    priors = serializers.ListField(child=serializers.FloatField(min_value=0), allow_null=True, default=None)
    amplitudes = serializers.ListField(child=serializers.FloatField(min_value=0), min_length=2, max_length=2,
                                       allow_null=True, default=None)
    phase_offset = serializers.FloatField(default=math.pi / 2)
    classes = serializers.ListField(child=AtomClassSerializer(), allow_null=True, default=None)

    def validate(self, attrs):
        if attrs['family'] == 'atoms' and not attrs['classes']:
            raise serializers.ValidationError({'classes': ["The atoms family needs a 'classes' list."]})
        return attrs


class ArchitectureSerializer(StrictSerializer):
    data_modes = serializers.IntegerField(min_value=1, default=1)
    ancilla_modes = serializers.IntegerField(min_value=0, default=0)
    qubits = serializers.IntegerField(min_value=1, default=1)
    layers = serializers.IntegerField(min_value=1, default=8)
    cutoff = serializers.IntegerField(min_value=2, max_value=settings.FOCK_CUTOFF_MAX,
                                      default=lambda: settings.FOCK_CUTOFF)
    decision_qubits = serializers.ListField(child=serializers.IntegerField(min_value=0), allow_empty=False,
                                            default=lambda: [0])
    couplings = serializers.ListField(
        child=serializers.ListField(child=serializers.ListField(child=serializers.IntegerField(min_value=0),
                                                                min_length=2, max_length=2)),
        allow_null=True, default=None,
    )


class OptimizerSerializer(StrictSerializer):
    learning_rate = serializers.FloatField(min_value=0, default=0.01)
    max_iterations = serializers.IntegerField(min_value=1, default=5000)
    tolerance = serializers.FloatField(min_value=0, default=1e-12)
    patience = serializers.IntegerField(min_value=1, default=100)
    beta1 = serializers.FloatField(min_value=0, max_value=1, default=0.9)
    beta2 = serializers.FloatField(min_value=0, max_value=1, default=0.999)
    epsilon = serializers.FloatField(min_value=0, default=1e-8)


class PenaltySerializer(StrictSerializer):
    start = serializers.FloatField(min_value=0, default=10.0)
    factor = serializers.FloatField(min_value=1, default=10.0)
    every = serializers.IntegerField(min_value=1, default=1000)
    maximum = serializers.FloatField(min_value=0, default=1e3)
    extra_stages = serializers.IntegerField(min_value=0, default=2)


class NoiseSerializer(StrictSerializer):
    generators = serializers.ListField(child=serializers.ChoiceField(choices=GENERATORS), allow_empty=False,
                                       default=lambda: ['q', 'p'])
    delta = serializers.FloatField(min_value=0, allow_null=True, default=None)
    covariance = serializers.ListField(child=serializers.ListField(child=serializers.FloatField()),
                                       allow_null=True, default=None)
    modes = serializers.ListField(child=serializers.IntegerField(min_value=0), allow_null=True, default=None)
    nodes = serializers.IntegerField(min_value=1, allow_null=True, default=None)

    def validate(self, attrs):
        if (attrs['delta'] is None) == (attrs['covariance'] is None):
            raise serializers.ValidationError({'delta': ['Give exactly one of delta or covariance.']})
        if attrs['modes'] is not None and len(attrs['modes']) != len(attrs['generators']):
            raise serializers.ValidationError({'modes': ['One target mode per generator is required.']})
        return attrs


class SeriesSerializer(StrictSerializer):
    key = serializers.CharField()
    values = serializers.ListField(child=serializers.JSONField(), allow_empty=False)


class SweepSerializer(StrictSerializer):
    axis = serializers.ChoiceField(choices=AXES, default='epsilon')
    values = serializers.ListField(child=serializers.FloatField(min_value=0), allow_empty=False)
    methods = serializers.ListField(child=serializers.ChoiceField(choices=METHODS), allow_empty=False,
                                    default=lambda: ['vqc'])
    threshold = serializers.BooleanField(default=False)
    tolerance = serializers.FloatField(min_value=0, allow_null=True, default=None)
    width = serializers.FloatField(min_value=0, default=1e-3)
    epsilon_grid = serializers.ListField(child=serializers.FloatField(min_value=0), allow_null=True, default=None)
    series = SeriesSerializer(allow_null=True, default=None)
    fock = serializers.IntegerField(min_value=0, max_value=settings.FOCK_CUTOFF_MAX - 2, allow_null=True,
                                    default=None)
    panel = serializers.CharField(allow_null=True, default=None)

    def validate(self, attrs):
        axis, methods = attrs['axis'], set(attrs['methods'])
        if len(set(attrs['values'])) != len(attrs['values']):
            raise serializers.ValidationError({'values': ['Grid values must be distinct.']})
        if 'theorem2-bound' in methods and axis != 'delta':
            raise serializers.ValidationError({'methods': ['theorem2-bound needs the delta axis.']})
        if 'threshold-asymptotic' in methods and axis != 'energy':
            raise serializers.ValidationError({'methods': ['threshold-asymptotic needs the energy axis.']})
        if axis == 'energy' and methods & set(TRAINED_METHODS) and not attrs['epsilon_grid']:
            raise serializers.ValidationError({'epsilon_grid': ['Energy sweeps need an epsilon grid.']})
        if axis != 'epsilon' and methods & set(BASELINES):
            raise serializers.ValidationError({'methods': ['Baselines run on the epsilon axis only.']})
        return attrs


class ExperimentConfigSerializer(StrictSerializer):
    """Experiment document accepted by the train and sweep commands"""
    schema_version = serializers.IntegerField(default=lambda: settings.SLAEN_SCHEMA_VERSION)
    kind = serializers.ChoiceField(choices=('train', 'sweep'), default='train')
    figure = serializers.CharField(allow_null=True, default=None)
    seed = serializers.IntegerField(min_value=0, max_value=2 ** 64 - 1, default=0)
    workers = serializers.IntegerField(min_value=1, allow_null=True, default=None)
    output_dir = serializers.CharField(allow_null=True, default=None)
    energy = serializers.FloatField(min_value=0, default=1.0)
    restarts = serializers.IntegerField(min_value=1, default=8)
    trainable = serializers.ChoiceField(choices=TRAINABLE, default='all')
    fd_step = serializers.FloatField(min_value=0, allow_null=True, default=None)
    validation_atoms = serializers.IntegerField(min_value=4, allow_null=True, default=None)
    initial = serializers.CharField(allow_null=True, default=None)
    task = TaskSerializer()
    architecture = ArchitectureSerializer()
    optimizer = OptimizerSerializer()
    penalty = PenaltySerializer()
    noise = NoiseSerializer(allow_null=True, default=None)
    sweep = SweepSerializer(allow_null=True, default=None)

    def validate_schema_version(self, value):
        if value != settings.SLAEN_SCHEMA_VERSION:
            raise serializers.ValidationError(f'Unsupported schema version {value}.')
        return value

    def validate(self, attrs):
        if attrs['kind'] == 'sweep' and attrs['sweep'] is None:
            raise serializers.ValidationError({'sweep': ['Sweep experiments need a sweep section.']})
        if attrs['trainable'] == 'measurement' and not attrs['initial']:
            raise serializers.ValidationError({'initial': ['Measurement-only training needs a fixed probe.']})
        return attrs


def flatten_errors(detail: Any, prefix: str = '') -> List[Tuple[str, str]]:
    """Turn nested DRF error details into (dotted key, message) pairs"""
    if isinstance(detail, Mapping):
        pairs = []
        for key, value in detail.items():
            path = prefix if key == 'non_field_errors' else (f'{prefix}.{key}' if prefix else str(key))
            pairs.extend(flatten_errors(value, path))
        return pairs
    if isinstance(detail, (list, tuple)):
        pairs = []
        for i, value in enumerate(detail):
            if isinstance(value, (Mapping, list, tuple)):
                pairs.extend(flatten_errors(value, f'{prefix}.{i}' if prefix else str(i)))
            else:
                pairs.append((prefix, str(value)))
        return pairs
    return [(prefix, str(detail))]


class ExperimentRecordSerializer(serializers.ModelSerializer):
    """Stored experiment record in API responses"""

    class Meta:
        model = ExperimentRecord
        fields = [
            'run_id', 'kind', 'figure', 'status', 'seed', 'tool_version', 'schema_version', 'cutoff',
            'config', 'payload', 'diagnostics', 'timings', 'output_dir', 'started_at', 'finished_at',
        ]


class ExperimentRecordSummarySerializer(serializers.ModelSerializer):
    """Record listing without the large config and payload documents"""

    class Meta:
        model = ExperimentRecord
        fields = ['run_id', 'kind', 'figure', 'status', 'seed', 'cutoff', 'started_at', 'finished_at']


class BaselineRequestSerializer(serializers.Serializer):
    """Closed-form baseline curve request"""
    method = serializers.ChoiceField(choices=BASELINES)
    epsilon = serializers.ListField(child=serializers.FloatField(min_value=0), allow_empty=False, max_length=200)
    energy = serializers.FloatField(min_value=0, default=1.0)
    fock = serializers.IntegerField(min_value=0, max_value=settings.FOCK_CUTOFF_MAX - 2, default=1)
    cutoff = serializers.IntegerField(min_value=2, max_value=settings.FOCK_CUTOFF_MAX, allow_null=True,
                                      default=None)

    def validate(self, attrs):
        if attrs['method'] in ('photon-counting', 'on-state') and len(attrs['epsilon']) > 25:
            raise serializers.ValidationError({'epsilon': ['Simulated baselines accept at most 25 points.']})
        return attrs


def serialize_points(epsilon, values) -> List[Dict[str, float]]:
    return [{'epsilon': float(e), 'error_probability': float(v)} for e, v in zip(epsilon, values)]
