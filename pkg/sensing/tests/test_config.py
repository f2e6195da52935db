import numpy as np
import pytest
from django.conf import settings

from sensing.exceptions import ConfigError
from sensing.services.experiments import (
    PRESET_DIR,
    apply_env_overrides,
    build_noise,
    build_train_config,
    cast_value,
    deep_merge,
    load_config,
    load_document,
    method_config,
    resolve_config,
    with_key,
)
from sensing.utils import config_hash


def config_error_key(document):
    with pytest.raises(ConfigError) as excinfo:
        resolve_config(document)
    return excinfo.value.key


class TestResolve:
    def test_defaults(self):
        config = resolve_config({})
        assert config['kind'] == 'train'
        assert config['schema_version'] == settings.SLAEN_SCHEMA_VERSION
        assert config['architecture']['cutoff'] == settings.FOCK_CUTOFF
        assert config['task']['family'] == 'binary-pm-epsilon'
        assert config['penalty']['maximum'] == 1e3
        assert config['noise'] is None

    def test_resolving_twice_changes_nothing(self):
        once = resolve_config({'task': {'family': 'circle-vs-vacuum', 'epsilon': 0.7}, 'seed': 3})
        assert resolve_config(once) == once

    @pytest.mark.parametrize('document, key', [
        ({'tsk': {}}, 'tsk'),
        ({'task': {'epsilonn': 0.1}}, 'task.epsilonn'),
        ({'architecture': {'layers': 0}}, 'architecture.layers'),
        ({'seed': -1}, 'seed'),
        ({'schema_version': 2}, 'schema_version'),
        ({'kind': 'sweep'}, 'sweep'),
        ({'kind': 'sweep', 'sweep': {'values': []}}, 'sweep.values'),
        ({'kind': 'sweep', 'sweep': {'values': [0.1, 0.1]}}, 'sweep.values'),
        ({'kind': 'sweep', 'sweep': {'values': [0.1], 'methods': ['theorem2-bound']}}, 'sweep.methods'),
        ({'kind': 'sweep', 'sweep': {'axis': 'energy', 'values': [1.0]}}, 'sweep.epsilon_grid'),
        ({'trainable': 'measurement'}, 'initial'),
        ({'noise': {'generators': ['q']}}, 'noise.delta'),
        ({'task': {'family': 'atoms'}}, 'task.classes'),
        ({'architecture': {'cutoff': 10 ** 4}}, 'architecture.cutoff'),
        ({'kind': 'sweep', 'sweep': {'values': [0.1], 'fock': 10 ** 9}}, 'sweep.fock'),
    ])
    def test_first_bad_key_is_named(self, document, key):
        assert config_error_key(document) == key

    def test_seed_accepts_unsigned_64_bit(self):
        assert resolve_config({'seed': 2 ** 64 - 1})['seed'] == 2 ** 64 - 1
        assert config_error_key({'seed': 2 ** 64}) == 'seed'


class TestDocuments:
    def test_deep_merge_keeps_sibling_keys(self):
        merged = deep_merge({'task': {'family': 'binary-pm-epsilon', 'epsilon': 0.3}}, {'task': {'epsilon': 0.5}})
        assert merged == {'task': {'family': 'binary-pm-epsilon', 'epsilon': 0.5}}

    @pytest.mark.parametrize('preset', sorted(p.stem for p in PRESET_DIR.glob('*.json')))
    def test_presets_resolve(self, preset):
        config = resolve_config(load_document(figure=preset))
        assert config['figure'] == preset

    def test_file_overrides_preset(self, write_config):
        path = write_config({'task': {'epsilon': 0.3}})
        config = resolve_config(load_document(path, 'train_binary'))
        assert config['task']['epsilon'] == 0.3
        assert config['architecture']['layers'] == 8

    def test_missing_inputs(self, tmp_path):
        with pytest.raises(ConfigError) as excinfo:
            load_document()
        assert excinfo.value.key == 'config'
        with pytest.raises(ConfigError) as excinfo:
            load_document(figure='fig99')
        assert excinfo.value.key == 'figure'
        with pytest.raises(ConfigError) as excinfo:
            load_document(str(tmp_path / 'absent.json'))
        assert excinfo.value.key == 'config'

    def test_invalid_json(self, tmp_path):
        path = tmp_path / 'broken.json'
        path.write_text('{"task": ', encoding='utf-8')
        with pytest.raises(ConfigError):
            load_document(str(path))


class TestOverrides:
    def test_environment_overrides_cast_to_resolved_types(self):
        env = {
            'SLAEN__TASK__EPSILON': '0.7',
            'SLAEN__ARCHITECTURE__LAYERS': '3',
            'SLAEN__ARCHITECTURE__DECISION_QUBITS': '[0]',
            'UNRELATED': 'x',
        }
        config = apply_env_overrides(resolve_config({}), env)
        assert config['task']['epsilon'] == 0.7
        assert config['architecture']['layers'] == 3
        assert config['architecture']['decision_qubits'] == [0]

    def test_unknown_environment_key(self):
        with pytest.raises(ConfigError) as excinfo:
            apply_env_overrides(resolve_config({}), {'SLAEN__TASK__RADIUS': '1'})
        assert excinfo.value.key == 'task.radius'

    def test_cast_errors_name_the_key(self):
        with pytest.raises(ConfigError) as excinfo:
            cast_value('many', 8, 'architecture.layers')
        assert excinfo.value.key == 'architecture.layers'
        assert cast_value('true', False, 'x') is True
        assert cast_value('null', None, 'noise') is None

    def test_flags_win(self, write_config):
        path = write_config({'seed': 1})
        config = load_config(path, seed=9, workers=2, output_dir='/tmp/elsewhere', env={'SLAEN__SEED': '5'})
        assert config['seed'] == 9
        assert config['workers'] == 2
        assert config['output_dir'] == '/tmp/elsewhere'

    def test_run_id_ignores_workers_and_output(self):
        base = resolve_config({'seed': 1})
        moved = resolve_config({'seed': 1, 'workers': 4, 'output_dir': '/tmp/x'})
        reseeded = resolve_config({'seed': 2})
        assert config_hash(base) == config_hash(moved)
        assert config_hash(base) != config_hash(reseeded)

    def test_series_key(self):
        config = resolve_config({})
        assert with_key(config, 'task.delta', 0.05)['task']['delta'] == 0.05
        with pytest.raises(ConfigError) as excinfo:
            with_key(config, 'task.width', 1)
        assert excinfo.value.key == 'sweep.series.key'


class TestServiceObjects:
    def test_noise_from_delta(self):
        noise = build_noise({'generators': ['q', 'p'], 'delta': 0.01, 'covariance': None, 'modes': None,
                             'nodes': None})
        assert noise.covariance == pytest.approx(1e-4 * np.eye(2))
        assert build_noise(None) is None
        assert build_noise(None, 0.02).covariance[0, 0] == pytest.approx(4e-4)

    def test_train_config(self):
        config = resolve_config({'energy': 2.0, 'restarts': 3, 'architecture': {'layers': 4, 'cutoff': 12}})
        train = build_train_config(config)
        assert train.energy == 2.0
        assert train.restarts == 3
        assert train.architecture.n_params == 16

    def test_ea_method_adds_an_ancilla(self):
        train, task_for = method_config(resolve_config({}), 'ea-vqc')
        assert train.architecture.ancilla_modes == 1
        assert task_for is None

    def test_reduced_method_on_real_circle(self):
        config = resolve_config({'task': {'family': 'rf-circle-2d', 'atoms': 8},
                                 'architecture': {'data_modes': 2, 'cutoff': 12}})
        train, task_for = method_config(config, 'reduced-vqc')
        assert train.architecture.data_modes == 1
        assert task_for(0.4).family == 'atoms'

    def test_reduced_method_needs_real_circle(self):
        with pytest.raises(ConfigError):
            method_config(resolve_config({}), 'reduced-vqc')
