import factory
from django.utils import timezone

from sensing.models import ExperimentRecord


class ExperimentRecordFactory(factory.django.DjangoModelFactory):
    class Meta:
        model = ExperimentRecord

    run_id = factory.Sequence(lambda n: f'{n:032x}')
    kind = 'train'
    figure = 'train_binary'
    status = 'finished'
    seed = '0'
    tool_version = '0.1.0'
    schema_version = 1
    cutoff = 30
    config = factory.LazyAttribute(lambda o: {'kind': o.kind, 'figure': o.figure})
    payload = factory.LazyFunction(lambda: {'error_probability': 0.01})
    diagnostics = factory.LazyFunction(dict)
    timings = factory.LazyFunction(lambda: {'wall_time_s': 1.5})
    output_dir = '/tmp/runs'
    started_at = factory.LazyFunction(timezone.now)
    finished_at = factory.LazyFunction(timezone.now)
