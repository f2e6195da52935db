"""
Experiment runner behind the ``train``, ``sweep`` and ``analyze`` commands.

A run starts from a JSON document (a file, a figure preset or both), is
resolved through the config serializers, overridden from ``SLAEN__*``
environment variables and command-line flags, and written to a run directory
named by the md5 of the resolved config. Each run leaves ``record.json``
plus its CSVs there and an ``ExperimentRecord`` row in the database.
"""
import copy
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from functools import partial
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import environ
import numpy as np
import pandas as pd
from django.conf import settings
from django.db import DatabaseError
from django.utils import timezone

from .. import __version__
from ..exceptions import ConfigError, ContractError, MissingInputError, OptimizationFailure, PrecisionError
from ..models import ExperimentRecord
from ..serializers import TRAINED_METHODS, ExperimentConfigSerializer, flatten_errors
from ..utils import config_hash, dotted_get, dotted_set, read_json, to_jsonable, write_frame, write_json
from .analytics import (
    GaussianProbe,
    SymplecticMap,
    baseline_value,
    induced_helstrom,
    noise_bound,
    on_state,
    reduce_2d_real_to_1d_complex,
    squeezed_ensemble_helstrom,
    theorem2_bound,
    threshold_asymptotic,
    transform_distribution,
    transform_energy,
)
from .base import BaseService, setting
from .circuit import Architecture, SystemParams, probe_energy, probe_state
from .fock import QuantumState, coherent_state, fock_state, photon_distribution, squeezed_vacuum, wigner
from .tasks import (
    ATOMS,
    BINARY,
    CIRCLE,
    RF_CIRCLE,
    LabeledDisplacementEnsemble,
    NoiseModel,
    TaskSpec,
    make_task,
    noisy_error_probability,
)
from .training import OptimizerSettings, PenaltySchedule, TrainConfig, TrainResult, Trainer, sweep_threshold

logger = logging.getLogger(__name__)

PRESET_DIR = Path(__file__).resolve().parent.parent / 'presets'

AXIS_COLUMNS = {
    'epsilon': 'epsilon (amplitude)',
    'delta': 'delta (amplitude)',
    'energy': 'N_S (photons)',
}
MAP_KINDS = ('beamsplitter', 'two-mode-squeezer', 'ellipse', 'sum', 'rf-reduction')


# --- config loading -------------------------------------------------------

def deep_merge(base: Mapping, override: Mapping) -> Dict[str, Any]:
    merged = copy.deepcopy(dict(base))
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def load_document(path: Optional[str] = None, figure: Optional[str] = None) -> Dict[str, Any]:
    """Raw config document: the figure preset, overlaid with the config file"""
    if not path and not figure:
        raise ConfigError("Give a config file or a figure preset", 'config')
    document: Dict[str, Any] = {}
    if figure:
        preset = PRESET_DIR / f'{figure}.json'
        if not preset.exists():
            raise ConfigError(f"Unknown figure preset {figure!r}", 'figure')
        document = read_json(preset)
    if path:
        source = Path(path)
        if not source.is_file():
            raise ConfigError(f"Config file {path} does not exist", 'config')
        try:
            loaded = read_json(source)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}", 'config')
        if not isinstance(loaded, dict):
            raise ConfigError("The config document must be a JSON object", 'config')
        document = deep_merge(document, loaded)
    if figure and not document.get('figure'):
        document['figure'] = figure
    return document


def resolve_config(document: Mapping) -> Dict[str, Any]:
    """Validate a document and fill every default; resolving twice changes nothing"""
    serializer = ExperimentConfigSerializer(data=document)
    if not serializer.is_valid():
        errors = flatten_errors(serializer.errors)
        message = '; '.join(f"{key}: {text}" for key, text in errors)
        raise ConfigError(f"Invalid config: {message}", errors[0][0] if errors else None)
    return json.loads(json.dumps(serializer.validated_data))


def cast_value(raw: str, current: Any, key: str) -> Any:
    """Cast an environment string to the type of the resolved value it replaces"""
    try:
        if isinstance(current, bool):
            return environ.Env.parse_value(raw, bool)
        if isinstance(current, int):
            return environ.Env.parse_value(raw, int)
        if isinstance(current, float):
            return environ.Env.parse_value(raw, float)
    except ValueError as e:
        raise ConfigError(f"Cannot read {raw!r} for {key}: {e}", key)
    if isinstance(current, str):
        return raw
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        if isinstance(current, (list, dict)):
            raise ConfigError(f"{key} expects a JSON value, got {raw!r}", key)
        return raw


def apply_env_overrides(config: Dict[str, Any], env: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    """Apply ``SLAEN__A__B=value`` variables to the resolved config key ``a.b``"""
    env = os.environ if env is None else env
    prefix = setting('SLAEN_ENV_PREFIX', 'SLAEN__')
    names = sorted(name for name in env if name.startswith(prefix))
    if not names:
        return config
    config = copy.deepcopy(config)
    for name in names:
        path = [part.lower() for part in name[len(prefix):].split('__')]
        key = '.'.join(path)
        try:
            current = dotted_get(config, path)
        except (KeyError, TypeError):
            raise ConfigError(f"Environment variable {name} names no config key", key)
        dotted_set(config, path, cast_value(env[name], current, key))
        logger.info(f"Config key {key} overridden from {name}")
    return resolve_config(config)


def load_config(path: Optional[str] = None, figure: Optional[str] = None, seed: Optional[int] = None,
                workers: Optional[int] = None, output_dir: Optional[str] = None,
                env: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    """File or preset, then environment overrides, then command-line flags"""
    config = resolve_config(load_document(path, figure))
    config = apply_env_overrides(config, env)
    flags = {'seed': seed, 'workers': workers, 'output_dir': output_dir}
    changes = {key: value for key, value in flags.items() if value is not None}
    if changes:
        config = resolve_config({**config, **changes})
    return config


def with_key(config: Dict[str, Any], key: str, value: Any) -> Dict[str, Any]:
    """Copy of a resolved config with one dotted key replaced"""
    path = key.split('.')
    try:
        dotted_get(config, path)
    except (KeyError, TypeError):
        raise ConfigError(f"Series key {key!r} names no config key", 'sweep.series.key')
    changed = copy.deepcopy(config)
    dotted_set(changed, path, value)
    return resolve_config(changed)


# --- building service objects --------------------------------------------

def build_noise(section: Optional[Mapping[str, Any]], delta: Optional[float] = None) -> Optional[NoiseModel]:
    """NoiseModel from a config section; ``delta`` replaces the configured strength"""
    if section is None and delta is None:
        return None
    section = section or {'generators': ['q', 'p'], 'delta': delta, 'covariance': None, 'modes': None,
                          'nodes': None}
    generators = tuple(section['generators'])
    if delta is not None or section['delta'] is not None:
        strength = delta if delta is not None else section['delta']
        cov = strength ** 2 * np.eye(len(generators))
    else:
        cov = np.asarray(section['covariance'], dtype=float)
    modes = tuple(section['modes']) if section['modes'] is not None else None
    try:
        return NoiseModel(generators, cov, modes, section['nodes'])
    except ContractError as e:
        raise ConfigError(str(e), 'noise.covariance')


def build_train_config(config: Mapping[str, Any], initial: Optional[SystemParams] = None) -> TrainConfig:
    return TrainConfig(
        architecture=Architecture.from_dict(config['architecture']),
        task=TaskSpec.from_dict(config['task']),
        energy=config['energy'],
        optimizer=OptimizerSettings(**config['optimizer']),
        penalty=PenaltySchedule(**config['penalty']),
        restarts=config['restarts'],
        seed=config['seed'],
        trainable=config['trainable'],
        noise=build_noise(config['noise']),
        fd_step=config['fd_step'],
        workers=config['workers'] or setting('SLAEN_WORKERS', 1),
        initial=initial,
        validation_atoms=config['validation_atoms'],
    )


def reduced_task(spec: TaskSpec, epsilon: float) -> TaskSpec:
    """One-mode complex task equivalent to the two-mode real task at ε"""
    reduction = reduce_2d_real_to_1d_complex(make_task(spec.replace(epsilon=epsilon)))
    return reduction.effective.spec


def method_config(config: Mapping[str, Any], method: str,
                  initial: Optional[SystemParams] = None) -> Tuple[TrainConfig, Optional[Callable]]:
    """Training config of one trained curve and the per-ε task builder it needs"""
    train_config = build_train_config(config, initial)
    arch = train_config.architecture
    if method == 'ea-vqc' and arch.ancilla_modes == 0:
        arch = Architecture.ea(data_modes=arch.data_modes, layers=arch.layers, cutoff=arch.cutoff,
                               qubits=arch.qubits, decision_qubits=arch.decision_qubits)
    if method == 'reduced-vqc':
        if train_config.task.family != RF_CIRCLE:
            raise ConfigError("reduced-vqc applies to the rf-circle-2d task only", 'sweep.methods')
        arch = Architecture(data_modes=1, ancilla_modes=arch.ancilla_modes, qubits=arch.qubits,
                            layers=arch.layers, cutoff=arch.cutoff, decision_qubits=arch.decision_qubits)
        return replace(train_config, architecture=arch), partial(reduced_task, train_config.task)
    return replace(train_config, architecture=arch), None


# --- record lookup --------------------------------------------------------

def output_root(config: Optional[Mapping[str, Any]] = None) -> Path:
    configured = config.get('output_dir') if config else None
    return Path(configured or settings.SLAEN_OUTPUT_DIR)


def locate_run(ref: str, root: Optional[Path] = None) -> Path:
    """record.json or params.json behind a run id, run directory or file path"""
    candidates = [Path(ref)]
    if root is not None:
        candidates.append(Path(root) / ref)
    for candidate in candidates:
        if candidate.is_file():
            return candidate
        for name in ('record.json', 'params.json'):
            if (candidate / name).is_file():
                return candidate / name
    raise MissingInputError(f"No record found for {ref!r}")


def load_params(ref: str, root: Optional[Path] = None) -> Tuple[SystemParams, Architecture]:
    path = locate_run(ref, root)
    try:
        document = read_json(path)
    except json.JSONDecodeError as e:
        raise MissingInputError(f"{path} is not a readable record: {e}")
    if 'payload' in document:
        document = (document['payload'] or {}).get('params')
    if not document or 'probe' not in document:
        raise MissingInputError(f"{path} holds no trained parameters")
    return SystemParams.from_dict(document)


# --- analysis helpers -----------------------------------------------------

def parse_state(spec: str, cutoff: int) -> QuantumState:
    """vacuum | fock:N | coherent:A | squeezed:R | on:N:W"""
    kind, *args = spec.split(':')
    try:
        if kind == 'vacuum' and not args:
            return fock_state(0, cutoff)
        if kind == 'fock' and len(args) == 1:
            return fock_state(int(args[0]), cutoff)
        if kind == 'coherent' and len(args) == 1:
            return coherent_state(complex(args[0]), cutoff)
        if kind == 'squeezed' and len(args) == 1:
            return squeezed_vacuum(float(args[0]), cutoff)
        if kind == 'on' and len(args) == 2:
            return on_state(int(args[0]), float(args[1]), cutoff)
    except ValueError as e:
        raise ConfigError(f"Cannot read state {spec!r}: {e}", 'state')
    raise ConfigError(f"Unknown state {spec!r}; use vacuum, fock:N, coherent:A, squeezed:R or on:N:W", 'state')


def photon_frame(state: QuantumState, mode: int = 0) -> pd.DataFrame:
    probs = photon_distribution(state, mode)
    return pd.DataFrame({'n (photons)': np.arange(probs.size), 'probability (probability)': probs})


def _check(checks: List[Dict[str, Any]], name: str, expected, actual, tolerance: float = 1e-9):
    expected, actual = np.asarray(expected, dtype=float), np.asarray(actual, dtype=float)
    error = float(np.max(np.abs(expected - actual))) if expected.size else 0.0
    entry: Dict[str, Any] = {'name': name, 'error': error, 'tolerance': tolerance, 'passed': error <= tolerance}
    if expected.ndim == 0:
        entry.update(expected=float(expected), actual=float(actual))
    checks.append(entry)


def _atoms_task(points: np.ndarray) -> LabeledDisplacementEnsemble:
    origin = {'atoms': np.zeros((1, points.shape[1])).tolist(), 'weights': [1.0]}
    return make_task(TaskSpec(family=ATOMS, classes=(origin, {'atoms': points.tolist(), 'weights': None})))


def _points(ensemble: LabeledDisplacementEnsemble) -> np.ndarray:
    return np.vstack([c.points for c in ensemble.classes])


def transform_check(kind: str, theta: float = math.pi / 5, r: float = 0.4, a: float = 1.5, b: float = 0.6,
                    epsilon: float = 0.5, probe_r: float = 0.3) -> Dict[str, Any]:
    """
    Numerical report on one symplectic map: the symplectic form, the energy
    closed form of the map, and the effect on a task's atoms.
    """
    if kind not in MAP_KINDS:
        raise ConfigError(f"Unknown map {kind!r}; use one of {', '.join(MAP_KINDS)}", 'map')
    checks: List[Dict[str, Any]] = []
    probe = GaussianProbe.squeezed(probe_r)
    two_mode = GaussianProbe.from_symplectic(
        (SymplecticMap.beamsplitter(0.4) @ SymplecticMap.embed(SymplecticMap.squeezer(probe_r), (0,), 2, 1)).matrix
    )
    phases = 2 * np.pi * np.arange(32) / 32

    if kind == 'beamsplitter':
        smap = SymplecticMap.beamsplitter(theta)
        n_s, n_s_prime = transform_energy(smap, probe)
        _check(checks, "N_S' = N_S / cos^2(theta)", n_s / math.cos(theta) ** 2, n_s_prime)
        ensemble = make_task(TaskSpec(family=BINARY, epsilon=epsilon))
        moved = transform_distribution(ensemble, smap)
        _check(checks, "atoms move to cos(theta) x", math.cos(theta) * _points(ensemble), _points(moved))
    elif kind == 'two-mode-squeezer':
        smap = SymplecticMap.two_mode_squeezer(r)
        n_s, n_s_prime = transform_energy(smap, probe)
        c2 = math.cosh(r) ** 2
        _check(checks, "N_S = cosh^2(r) N_S' + cosh^2(r) - 1", c2 * n_s_prime + c2 - 1.0, n_s)
    elif kind == 'ellipse':
        smap = SymplecticMap.ellipse_to_circle(a, b)
        ensemble = _atoms_task(np.column_stack([a * np.cos(phases), b * np.sin(phases)]))
        moved = transform_distribution(ensemble, smap)
        radii = np.linalg.norm(moved.classes[1].points, axis=1)
        _check(checks, "ellipse atoms land on radius sqrt(ab)", np.full(radii.size, math.sqrt(a * b)), radii)
        back = transform_distribution(moved, smap.inverse())
        _check(checks, "inverse map restores the atoms", _points(ensemble), _points(back), 1e-10)
        v = probe.covariance
        n_s, _ = transform_energy(smap, probe)
        _check(checks, "N_S = ((a/b) V_qq + (b/a) V_pp - 1) / 2", 0.5 * (a / b * v[0, 0] + b / a * v[1, 1] - 1.0), n_s)
    elif kind == 'sum':
        smap = SymplecticMap.sum_gate()
        v = two_mode.covariance
        n_s, n_s_prime = transform_energy(smap, two_mode)
        shift = 0.5 * (v[0, 0] + v[3, 3] + 2 * v[0, 2] - 2 * v[1, 3])
        _check(checks, "N_S - N_S' = <q1^2 + p2^2 + {q1,q2} - {p1,p2}>/2", shift, n_s - n_s_prime)
        rng = np.random.default_rng(0)
        ensemble = _atoms_task(rng.normal(0.0, epsilon, (16, 4)))
        back = transform_distribution(transform_distribution(ensemble, smap), smap.inverse())
        _check(checks, "inverse map restores the atoms", _points(ensemble), _points(back), 1e-10)
    else:
        ensemble = make_task(TaskSpec(family=RF_CIRCLE, epsilon=epsilon))
        reduction = reduce_2d_real_to_1d_complex(ensemble)
        smap = reduction.smap
        points = _points(reduction.transformed)
        _check(checks, "x2 = x4 after the reduction", points[:, 1], points[:, 3], 1e-12)
        _check(checks, "x1 = -x3 after the reduction", points[:, 0], -points[:, 2], 1e-12)
        back = transform_distribution(reduction.transformed, smap.inverse())
        _check(checks, "inverse map restores the atoms", _points(ensemble), _points(back), 1e-10)
        radii = np.linalg.norm(reduction.effective.classes[1].points, axis=1)
        _check(checks, "effective atoms lie on a circle of radius epsilon", np.full(radii.size, epsilon), radii)
        s, v = smap.matrix, two_mode.covariance
        _check(checks, "energy bookkeeping matches the trace formula",
               0.5 * (np.trace(s @ v @ s.T) - np.trace(v)), reduction.energy_shift(two_mode))

    w = np.kron(np.eye(smap.n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    _check(checks, "S Omega S^T = Omega", w, smap.matrix @ w @ smap.matrix.T, 1e-10)
    report = {
        'map': kind,
        'parameters': {'theta': theta, 'r': r, 'a': a, 'b': b, 'epsilon': epsilon, 'probe_r': probe_r},
        'checks': checks,
        'passed': all(c['passed'] for c in checks),
    }
    logger.info(f"transform-check {kind}: {sum(c['passed'] for c in checks)}/{len(checks)} checks passed")
    return report


# --- per-point workers (module level so they pickle) ---------------------

def _squeezed_helstrom_point(task: TaskSpec, energy: float, cutoff: int, epsilon: float) -> float:
    return squeezed_ensemble_helstrom(make_task(task.replace(epsilon=epsilon)), energy, cutoff)


def _noisy_point(ensemble: LabeledDisplacementEnsemble, params: SystemParams, arch: Architecture,
                 noise: NoiseModel) -> float:
    try:
        return noisy_error_probability(ensemble, params, arch, noise)
    except PrecisionError as e:
        logger.warning(f"Noisy error at covariance {noise.covariance.tolist()} not converged: {e}")
        return math.nan


def _column(method: str, quantity: str, unit: str, tag: Optional[str]) -> str:
    name = f"{method}[{tag}]" if tag else method
    return f"{name} {quantity} ({unit})"


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> Optional[float]:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0) & np.isfinite(y)
    if keep.sum() < 2:
        return None
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


class ExperimentRunner(BaseService):
    """Runs resolved configs and persists their records"""

    def __init__(self):
        super().__init__()
        self.warnings: List[str] = []

    # --- bookkeeping ---

    def _workers(self, config: Mapping[str, Any]) -> int:
        return config['workers'] or setting('SLAEN_WORKERS', 1)

    def _map(self, fn: Callable, items: Sequence, workers: int) -> List[Any]:
        items = list(items)
        if workers > 1 and len(items) > 1:
            with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
                return list(pool.map(fn, items))
        return [fn(item) for item in items]

    def _warn(self, message: str):
        self.warnings.append(message)
        self.log_warning(message)

    def _record(self, config: Mapping[str, Any], run_id: str, run_dir: Path, started, status: str,
                payload: Dict[str, Any], diagnostics: Dict[str, Any], wall_time: float,
                files: Sequence[str], cutoff: Optional[int] = None) -> Dict[str, Any]:
        record = {
            'run_id': run_id,
            'kind': config['kind'],
            'figure': config['figure'] or '',
            'status': status,
            'seed': str(config['seed']),
            'tool_version': __version__,
            'schema_version': config['schema_version'],
            'cutoff': cutoff,
            'config': config,
            'payload': payload,
            'diagnostics': {**diagnostics, 'warnings': list(self.warnings)},
            'timings': {'wall_time_s': wall_time},
            'output_dir': str(run_dir),
            'files': list(files),
            'started_at': started.isoformat(),
            'finished_at': timezone.now().isoformat(),
        }
        record = to_jsonable(record)
        write_json(run_dir / 'record.json', record)
        self._store(record, started)
        self.log_info(f"Run {run_id} {status}; record written to {run_dir / 'record.json'}")
        return record

    def _store(self, record: Dict[str, Any], started):
        fields = ('kind', 'figure', 'status', 'seed', 'tool_version', 'schema_version', 'cutoff', 'config',
                  'payload', 'diagnostics', 'timings', 'output_dir')
        defaults = {name: record[name] for name in fields}
        defaults.update(started_at=started, finished_at=timezone.now())
        try:
            ExperimentRecord.objects.update_or_create(run_id=record['run_id'], defaults=defaults)
        except DatabaseError as e:
            self.log_warning(f"Record {record['run_id']} not stored in the database (run migrate?): {e}")

    def _prepare(self, config: Mapping[str, Any], kind: str) -> Tuple[str, Path]:
        if config['kind'] != kind:
            raise ConfigError(f"This is a {config['kind']} config, not a {kind} config", 'kind')
        self.warnings = []
        run_id = config_hash(config)
        run_dir = output_root(config) / run_id
        run_dir.mkdir(parents=True, exist_ok=True)
        return run_id, run_dir

    def _initial(self, config: Mapping[str, Any]) -> Optional[SystemParams]:
        if not config['initial']:
            return None
        params, arch = load_params(config['initial'], output_root(config))
        expected = Architecture.from_dict(config['architecture'])
        if arch.n_params != expected.n_params or arch.n_modes != expected.n_modes:
            raise ConfigError(f"Parameters in {config['initial']} do not fit the configured architecture",
                              'initial')
        return params

    # --- train ---

    def run_train(self, config: Dict[str, Any]) -> Dict[str, Any]:
        run_id, run_dir = self._prepare(config, 'train')
        started, clock = timezone.now(), time.perf_counter()
        train_config = build_train_config(config, self._initial(config))
        self.log_info(f"Run {run_id}: training {train_config.task.family} at epsilon={train_config.task.epsilon}")
        try:
            result = Trainer().minimize(train_config)
        except OptimizationFailure as e:
            self._record(config, run_id, run_dir, started, 'failed', {},
                         {'message': str(e), 'traces': e.traces}, time.perf_counter() - clock, ['record.json'])
            raise

        payload = result.to_payload()
        diagnostics = self.train_diagnostics(result, config)
        payload['helstrom_limit'] = diagnostics.pop('helstrom_limit', None)
        write_json(run_dir / 'params.json', result.params.to_dict(result.architecture))
        write_frame(run_dir / 'trace.csv', result.trace_frame())
        files = ['record.json', 'params.json', 'trace.csv']
        return self._record(config, run_id, run_dir, started, 'finished', payload, diagnostics,
                            time.perf_counter() - clock, files, result.architecture.cutoff)

    def train_diagnostics(self, result: TrainResult, config: Mapping[str, Any]) -> Dict[str, Any]:
        arch = result.architecture
        state = probe_state(result.params.probe, arch, check_leakage=False)
        diagnostics: Dict[str, Any] = {
            'cutoff_requested': config['architecture']['cutoff'],
            'cutoff_used': arch.cutoff,
            'probe_leakage': state.leakage(),
            'probe_energy': probe_energy(state, arch),
        }
        if arch.cutoff != config['architecture']['cutoff']:
            self._warn(f"Cutoff escalated from {config['architecture']['cutoff']} to {arch.cutoff}")
        ensemble = make_task(result.task)
        if ensemble.labels == 2:
            diagnostics['helstrom_limit'] = induced_helstrom(result.params, arch, ensemble)
        return diagnostics

    # --- sweep ---

    def run_sweep(self, config: Dict[str, Any]) -> Dict[str, Any]:
        run_id, run_dir = self._prepare(config, 'sweep')
        started, clock = timezone.now(), time.perf_counter()
        sweep = config['sweep']
        series = sweep['series']
        if series is None:
            variants = [(None, config)]
        else:
            variants = [(f"{series['key']}={value}", with_key(config, series['key'], value))
                        for value in series['values']]

        frames, summary, cutoffs = [], {}, []
        for tag, variant in variants:
            self.log_info(f"Run {run_id}: {sweep['axis']} sweep{f' for {tag}' if tag else ''}")
            frame, panel_summary, used = self.sweep_panel(variant, tag)
            frames.append(frame)
            summary[tag or 'default'] = panel_summary
            cutoffs.extend(used)

        axis_column = AXIS_COLUMNS[sweep['axis']]
        curve = pd.concat([frames[0]] + [f.drop(columns=axis_column) for f in frames[1:]], axis=1)
        panel = sweep['panel'] or config['figure'] or 'curve'
        write_frame(run_dir / f'{panel}.csv', curve)
        payload = {
            'axis': sweep['axis'],
            'panel': panel,
            'curve': {column: curve[column].tolist() for column in curve.columns},
            'methods': summary,
        }
        diagnostics = {'cutoff_used': max(cutoffs) if cutoffs else config['architecture']['cutoff']}
        return self._record(config, run_id, run_dir, started, 'finished', payload, diagnostics,
                            time.perf_counter() - clock, ['record.json', f'{panel}.csv'], diagnostics['cutoff_used'])

    def sweep_panel(self, config: Mapping[str, Any], tag: Optional[str] = None
                    ) -> Tuple[pd.DataFrame, Dict[str, Any], List[int]]:
        axis = config['sweep']['axis']
        values = sorted(config['sweep']['values'])
        handler = {'epsilon': self._epsilon_axis, 'delta': self._delta_axis, 'energy': self._energy_axis}[axis]
        columns, summary, cutoffs = handler(config, values, tag)
        frame = pd.DataFrame({AXIS_COLUMNS[axis]: values, **columns})
        return frame, summary, cutoffs

    def _epsilon_axis(self, config, values, tag):
        sweep = config['sweep']
        initial = self._initial(config)
        columns, summary, cutoffs = {}, {}, []
        for method in sweep['methods']:
            if method in TRAINED_METHODS:
                train_config, task_for = method_config(config, method, initial)
                result = sweep_threshold(train_config, values, sweep['tolerance'], sweep['width'],
                                         sweep['threshold'], task_for)
                columns[_column(method, 'P_E', 'probability', tag)] = [p.error for p in result.points]
                cutoffs.extend(p.result.architecture.cutoff for p in result.points if p.result is not None)
                summary[method] = {
                    'epsilon_th': result.epsilon_th,
                    'monotone_past_threshold': result.monotone,
                    'points': [{'epsilon': p.epsilon, 'error_probability': p.error,
                                'energy_residual': p.energy_residual} for p in result.points],
                    'bisection': [{'epsilon': p.epsilon, 'error_probability': p.error}
                                  for p in result.bisection],
                }
                if not result.monotone:
                    self._warn(f"{method}: error rose again past the threshold")
            else:
                columns[_column(method, 'P_E', 'probability', tag)] = self.baseline_points(config, method, values)
        return columns, summary, cutoffs

    def baseline_points(self, config: Mapping[str, Any], method: str, values: Sequence[float]) -> List[float]:
        task = TaskSpec.from_dict(config['task'])
        energy = config['energy']
        cutoff = config['architecture']['cutoff']
        fock = config['sweep']['fock'] if config['sweep']['fock'] is not None else max(1, round(energy))
        if method == 'helstrom-squeezed' and task.family != BINARY:
            fn = partial(_squeezed_helstrom_point, task, energy, cutoff)
        elif method in ('gaussian-homodyne', 'helstrom-squeezed', 'photon-counting') and task.family != BINARY:
            raise ConfigError(f"{method} is a baseline of the binary task", 'sweep.methods')
        elif method in ('number-interferometry', 'on-state') and task.family != CIRCLE:
            raise ConfigError(f"{method} is a baseline of the circle task", 'sweep.methods')
        else:
            fn = partial(baseline_value, method, energy=energy, fock=fock,
                         cutoff=None if method == 'photon-counting' else cutoff)
        return self._map(fn, values, self._workers(config))

    def _delta_axis(self, config, values, tag):
        sweep = config['sweep']
        noiseless = {**config, 'noise': None}
        initial = self._initial(config)
        workers = self._workers(config)
        columns, summary, cutoffs = {}, {}, []
        trained: Dict[str, TrainResult] = {}
        for method in sweep['methods']:
            if method not in TRAINED_METHODS:
                continue
            train_config, task_for = method_config(noiseless, method, initial)
            if task_for is not None:
                raise ConfigError("reduced-vqc is not available on the delta axis", 'sweep.methods')
            result = Trainer().minimize(train_config)
            trained[method] = result
            cutoffs.append(result.architecture.cutoff)
            ensemble = make_task(result.task)
            noises = [build_noise(config['noise'], delta) for delta in values]
            errors = self._map(partial(_noisy_point, ensemble, result.params, result.architecture), noises, workers)
            columns[_column(method, 'P_E', 'probability', tag)] = errors
            summary[method] = {'noiseless_error_probability': result.error, 'loglog_slope': loglog_slope(values, errors)}

        if 'theorem2-bound' in sweep['methods']:
            if not trained:
                raise ConfigError("theorem2-bound needs a trained curve on the same panel", 'sweep.methods')
            source, result = next(iter(trained.items()))
            ensemble = make_task(result.task)
            _, gen_cov = noise_bound(result.params, result.architecture, ensemble, build_noise(config['noise'], 1.0))
            bounds = [theorem2_bound(build_noise(config['noise'], delta).covariance, gen_cov) for delta in values]
            columns[_column('theorem2-bound', 'P_E', 'probability', tag)] = bounds
            summary['theorem2-bound'] = {'source': source, 'generator_covariance': gen_cov.tolist()}
            measured = columns[_column(source, 'P_E', 'probability', tag)]
            for delta, bound, error in zip(values, bounds, measured):
                if np.isfinite(error) and error > bound:
                    self._warn(f"Measured P_E {error:.3e} exceeds the bound {bound:.3e} at delta={delta}")
        return columns, summary, cutoffs

    def _energy_axis(self, config, values, tag):
        sweep = config['sweep']
        initial = self._initial(config)
        columns, summary, cutoffs = {}, {}, []
        for method in sweep['methods']:
            if method in TRAINED_METHODS:
                thresholds = []
                for n_s in values:
                    train_config, task_for = method_config({**config, 'energy': n_s}, method, initial)
                    result = sweep_threshold(train_config, sweep['epsilon_grid'], sweep['tolerance'], sweep['width'],
                                             sweep['threshold'], task_for)
                    cutoffs.extend(p.result.architecture.cutoff for p in result.points if p.result is not None)
                    thresholds.append(math.nan if result.epsilon_th is None else result.epsilon_th)
                    self.log_info(f"{method} at N_S={n_s}: epsilon_th={thresholds[-1]}")
                columns[_column(method, 'epsilon_th', 'amplitude', tag)] = thresholds
                asymptotic = threshold_asymptotic(np.asarray(values))
                summary[method] = {'epsilon_th': thresholds,
                                   'ratio_to_asymptotic': (np.asarray(thresholds) / asymptotic).tolist()}
            elif method == 'threshold-asymptotic':
                columns[_column(method, 'epsilon_th', 'amplitude', tag)] = np.atleast_1d(
                    threshold_asymptotic(np.asarray(values))).tolist()
        return columns, summary, cutoffs

    # --- analyze ---

    def analysis_dir(self, out: Optional[str], record: Optional[str]) -> Path:
        if out:
            return Path(out)
        if record:
            return locate_run(record, output_root()).parent
        return output_root() / 'analysis'

    def analysis_state(self, record: Optional[str], state: Optional[str], cutoff: int) -> QuantumState:
        if record:
            params, arch = load_params(record, output_root())
            return probe_state(params.probe, arch, check_leakage=False)
        if state:
            return parse_state(state, cutoff)
        raise MissingInputError("Give --record or --state")

    def run_wigner(self, record: Optional[str] = None, state: Optional[str] = None, out: Optional[str] = None,
                   mode: int = 0, q_range: Tuple[float, float] = (-5.0, 5.0),
                   p_range: Tuple[float, float] = (-5.0, 5.0), resolution: int = 101,
                   cutoff: Optional[int] = None) -> Path:
        source = self.analysis_state(record, state, cutoff or setting('FOCK_CUTOFF', 30))
        single = len(source.layout.entries) == 1
        grid = wigner(source, tuple(q_range), tuple(p_range), resolution, mode=None if single else mode)
        return write_frame(self.analysis_dir(out, record) / 'wigner.csv', grid.to_frame())

    def run_photon_dist(self, record: Optional[str] = None, state: Optional[str] = None, out: Optional[str] = None,
                        mode: int = 0, cutoff: Optional[int] = None) -> Path:
        source = self.analysis_state(record, state, cutoff or setting('FOCK_CUTOFF', 30))
        return write_frame(self.analysis_dir(out, record) / 'photon_dist.csv', photon_frame(source, mode))

    def run_transform_check(self, kind: str, out: Optional[str] = None, **params) -> Path:
        report = transform_check(kind, **params)
        path = write_json(self.analysis_dir(out, None) / 'transform_check.json', report)
        if not report['passed']:
            self.log_warning(f"transform-check {kind} failed: see {path}")
        return path


def run_train(path: Optional[str] = None, figure: Optional[str] = None, **flags) -> Dict[str, Any]:
    return ExperimentRunner().run_train(load_config(path, figure, **flags))


def run_sweep(path: Optional[str] = None, figure: Optional[str] = None, **flags) -> Dict[str, Any]:
    return ExperimentRunner().run_sweep(load_config(path, figure, **flags))


def run_analyze(subcommand: str, **options) -> Path:
    runner = ExperimentRunner()
    handlers = {
        'wigner': runner.run_wigner,
        'photon-dist': runner.run_photon_dist,
        'transform-check': runner.run_transform_check,
    }
    if subcommand not in handlers:
        raise ConfigError(f"Unknown analysis {subcommand!r}", 'subcommand')
    return handlers[subcommand](**options)
