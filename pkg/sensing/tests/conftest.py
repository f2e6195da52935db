import json

import pytest
from django.core.cache import cache

from sensing.services.circuit import Architecture, SystemParams
from sensing.utils import write_json


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='run slow training tests')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def clear_cache():
    cache.clear()
    yield
    cache.clear()


@pytest.fixture
def small_arch():
    return Architecture(data_modes=1, qubits=1, layers=2, cutoff=20)


@pytest.fixture
def zero_probe_file(tmp_path, small_arch):
    """params.json with an all-zero circuit, usable as a fixed probe"""
    return write_json(tmp_path / 'fixed' / 'params.json', SystemParams.zeros(small_arch).to_dict(small_arch))


@pytest.fixture
def write_config(tmp_path):
    def _write(document, name='config.json'):
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding='utf-8')
        return str(path)
    return _write


@pytest.fixture
def measurement_config(zero_probe_file, tmp_path):
    """Fast measurement-only training document for the binary task"""
    return {
        'kind': 'train',
        'seed': 11,
        'energy': 0.0,
        'restarts': 2,
        'trainable': 'measurement',
        'initial': str(zero_probe_file),
        'output_dir': str(tmp_path / 'runs'),
        'task': {'family': 'binary-pm-epsilon', 'epsilon': 0.45},
        'architecture': {'data_modes': 1, 'qubits': 1, 'layers': 2, 'cutoff': 20},
        'optimizer': {'learning_rate': 0.05, 'max_iterations': 15, 'patience': 5},
    }
