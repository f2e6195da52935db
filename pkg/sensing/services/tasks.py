"""
Labelled displacement ensembles and the forward classification pipeline.

A probe |ψ_p> = U(θ_p)|vac,0> is displaced by a data vector x drawn from a
class distribution, optionally hit by a random noise unitary
U_ζ = exp(-i ζ·g), then measured through V(θ_m) and a computational-basis
readout of the decision qubits.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from numpy.polynomial.hermite import hermgauss

from ..exceptions import ConfigError, ContractError, LeakageError, PrecisionError, ShapeError
from .base import setting
from .circuit import AnsatzParams, Architecture, SystemParams, apply_ansatz, probe_state
from .fock import QuantumState, apply_local, displace_vectors, number, quadratures, unitary_from_hermitian

logger = logging.getLogger(__name__)

BINARY = 'binary-pm-epsilon'
GAUSSIAN = 'gaussian-clusters'
CIRCLE = 'circle-vs-vacuum'
RF_CIRCLE = 'rf-circle-2d'
ATOMS = 'atoms'
FAMILIES = (BINARY, GAUSSIAN, CIRCLE, RF_CIRCLE, ATOMS)


@dataclass(frozen=True)
class TaskSpec:
    family: str = BINARY
    epsilon: float = 0.5
    delta: float = 0.0
    atoms: Optional[int] = None
    nodes_per_axis: Optional[int] = None
    priors: Optional[Tuple[float, ...]] = None
    amplitudes: Optional[Tuple[float, float]] = None
    phase_offset: float = math.pi / 2
    classes: Optional[Tuple[Dict[str, Any], ...]] = None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TaskSpec':
        data = dict(data)
        for key in ('priors', 'amplitudes'):
            if data.get(key) is not None:
                data[key] = tuple(float(v) for v in data[key])
        if data.get('classes') is not None:
            data['classes'] = tuple(data['classes'])
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"Invalid task definition: {e}", 'task')

    def replace(self, **changes) -> 'TaskSpec':
        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class ClassAtoms:
    """Weighted displacement atoms of one label; points has shape (K, 2M)"""
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        weights = np.asarray(self.weights, dtype=float).ravel()
        if points.shape[0] != weights.size:
            raise ShapeError(f"{points.shape[0]} atoms but {weights.size} weights")
        if points.shape[1] % 2:
            raise ShapeError("Displacement atoms need an even number of coordinates")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-10:
            raise ConfigError("Atom weights must be non-negative and sum to 1", 'task.classes')
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'weights', weights)

    @property
    def size(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True, eq=False)
class LabeledDisplacementEnsemble:
    spec: TaskSpec
    classes: Tuple[ClassAtoms, ...]
    priors: np.ndarray

    def __post_init__(self):
        priors = np.asarray(self.priors, dtype=float)
        if priors.size != len(self.classes):
            raise ConfigError(f"{priors.size} priors for {len(self.classes)} labels", 'task.priors')
        if np.any(priors < 0) or abs(priors.sum() - 1.0) > 1e-10:
            raise ConfigError("Priors must be non-negative and sum to 1", 'task.priors')
        widths = {c.points.shape[1] for c in self.classes}
        if len(widths) != 1:
            raise ShapeError("All labels must use displacement vectors of the same length")
        object.__setattr__(self, 'priors', priors)

    @property
    def labels(self) -> int:
        return len(self.classes)

    @property
    def data_modes(self) -> int:
        return self.classes[0].points.shape[1] // 2

    def discretize(self, atoms: int) -> 'LabeledDisplacementEnsemble':
        """Rebuild the ensemble with ``atoms`` atoms per continuous class"""
        if self.spec.family == GAUSSIAN:
            nodes = math.isqrt(atoms)
            if nodes * nodes != atoms:
                raise ConfigError(f"Gaussian clusters need a square atom count, got {atoms}", 'task.atoms')
            return make_task(self.spec.replace(nodes_per_axis=nodes))
        if self.spec.family in (CIRCLE, RF_CIRCLE):
            return make_task(self.spec.replace(atoms=atoms))
        return self

    def sample(self, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """Draw ``n`` labelled displacements from the underlying distribution"""
        labels = rng.choice(self.labels, size=n, p=self.priors)
        points = np.zeros((n, 2 * self.data_modes))
        spec = self.spec
        for i, label in enumerate(labels):
            if spec.family == GAUSSIAN:
                mean = self.classes[label].points.T @ self.classes[label].weights
                points[i] = mean + rng.normal(0.0, spec.delta, mean.size)
            elif spec.family in (CIRCLE, RF_CIRCLE) and label == 1:
                points[i] = _circle_point(spec, rng.uniform(0, 2 * np.pi))
            else:
                atoms = self.classes[label]
                points[i] = atoms.points[rng.choice(atoms.size, p=atoms.weights)]
        return points, labels

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for label, atoms in enumerate(self.classes):
            for point, weight in zip(atoms.points, atoms.weights):
                row = {'label': label, 'prior': self.priors[label], 'weight': weight}
                for m in range(self.data_modes):
                    row[f're_alpha_{m + 1} (amplitude)'] = point[2 * m]
                    row[f'im_alpha_{m + 1} (amplitude)'] = point[2 * m + 1]
                rows.append(row)
        return pd.DataFrame(rows)

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format='%.12g')


def _circle_point(spec: TaskSpec, phi: float) -> np.ndarray:
    if spec.family == CIRCLE:
        return spec.epsilon * np.array([np.cos(phi), np.sin(phi)])
    a1, a2 = spec.amplitudes or (spec.epsilon, spec.epsilon)
    return np.array([a1 * np.cos(phi), 0.0, a2 * np.cos(phi + spec.phase_offset), 0.0])


def _origin(width: int) -> ClassAtoms:
    return ClassAtoms(np.zeros((1, width)), [1.0])


def _atom_weights(entry: Dict[str, Any]) -> np.ndarray:
    weights = entry.get('weights')
    if weights is None:
        return np.full(len(entry['atoms']), 1.0 / len(entry['atoms']))
    return np.asarray(weights, dtype=float)


def make_task(spec) -> LabeledDisplacementEnsemble:
    """Build a discretised ensemble from a TaskSpec or a config mapping"""
    if not isinstance(spec, TaskSpec):
        spec = TaskSpec.from_dict(spec)
    if spec.family not in FAMILIES:
        raise ConfigError(f"Unknown task family {spec.family!r}", 'task.family')
    if not (np.isfinite(spec.epsilon) and spec.epsilon >= 0):
        raise ConfigError(f"epsilon must be finite and non-negative, got {spec.epsilon}", 'task.epsilon')
    if not (np.isfinite(spec.delta) and spec.delta >= 0):
        raise ConfigError(f"delta must be finite and non-negative, got {spec.delta}", 'task.delta')

    eps = spec.epsilon
    if spec.family == BINARY:
        classes = (ClassAtoms([[eps, 0.0]], [1.0]), ClassAtoms([[-eps, 0.0]], [1.0]))
    elif spec.family == GAUSSIAN:
        nodes = spec.nodes_per_axis or setting('GAUSSIAN_NODES_PER_AXIS', 7)
        if nodes < 1:
            raise ConfigError("nodes_per_axis must be positive", 'task.nodes_per_axis')
        classes = tuple(_gaussian_cluster(sign * eps, spec.delta, nodes) for sign in (1, -1))
    elif spec.family in (CIRCLE, RF_CIRCLE):
        k = spec.atoms or setting('CIRCLE_TRAIN_ATOMS', 32)
        if k < 4:
            raise ConfigError(f"Circle tasks need at least 4 atoms, got {k}", 'task.atoms')
        phases = 2 * np.pi * np.arange(k) / k
        ring = np.array([_circle_point(spec, phi) for phi in phases])
        classes = (_origin(ring.shape[1]), ClassAtoms(ring, np.full(k, 1.0 / k)))
    else:
        if not spec.classes:
            raise ConfigError("The atoms family needs a 'classes' list", 'task.classes')
        classes = tuple(ClassAtoms(c['atoms'], _atom_weights(c)) for c in spec.classes)
        if len(classes) < 2:
            raise ConfigError("At least two labels are required", 'task.classes')

    priors = spec.priors or tuple(np.full(len(classes), 1.0 / len(classes)))
    return LabeledDisplacementEnsemble(spec, classes, np.asarray(priors))


def _gaussian_cluster(mean_re: float, delta: float, nodes: int) -> ClassAtoms:
    """Tensor Gauss-Hermite discretisation of N((mean_re, 0), δ² I)"""
    if delta == 0:
        return ClassAtoms([[mean_re, 0.0]], [1.0])
    t, w = hermgauss(nodes)
    offsets = np.sqrt(2) * delta * t
    re, im = np.meshgrid(mean_re + offsets, offsets, indexing='ij')
    weights = np.outer(w, w).ravel() / np.pi
    return ClassAtoms(np.column_stack([re.ravel(), im.ravel()]), weights / weights.sum())


# --- noise ----------------------------------------------------------------

GENERATORS = ('q', 'p', 'n')


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Zero-mean Gaussian random unitary exp(-i ζ·g) on data modes"""
    generators: Tuple[str, ...] = ('q', 'p')
    covariance: np.ndarray = field(default_factory=lambda: np.zeros((2, 2)))
    modes: Optional[Tuple[int, ...]] = None
    nodes: Optional[int] = None

    def __post_init__(self):
        gens = tuple(self.generators)
        if any(g not in GENERATORS for g in gens):
            raise ConfigError(f"Noise generators must be among {GENERATORS}, got {gens}", 'noise.generators')
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if cov.shape != (len(gens), len(gens)):
            raise ContractError(f"Noise covariance shape {cov.shape} for {len(gens)} generators")
        if np.max(np.abs(cov - cov.T), initial=0.0) > 1e-12:
            raise ContractError("Noise covariance must be symmetric")
        if gens and np.min(np.linalg.eigvalsh(cov)) < -1e-12:
            raise ContractError("Noise covariance must be positive semidefinite")
        modes = tuple(self.modes) if self.modes is not None else (0,) * len(gens)
        if len(modes) != len(gens):
            raise ContractError("One target mode per noise generator is required")
        object.__setattr__(self, 'generators', gens)
        object.__setattr__(self, 'covariance', cov)
        object.__setattr__(self, 'modes', modes)

    @classmethod
    def isotropic(cls, delta: float, generators: Sequence[str] = ('q', 'p'), mode: int = 0) -> 'NoiseModel':
        """Independent noise of standard deviation δ on each generator"""
        return cls(tuple(generators), delta ** 2 * np.eye(len(generators)), (mode,) * len(generators))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.covariance)

    def quadrature(self, nodes: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Product Gauss-Hermite nodes ζ (rows) and weights for N(0, Cov)"""
        nodes = nodes or self.nodes or setting('NOISE_QUADRATURE_NODES', 15)
        evals, evecs = np.linalg.eigh(self.covariance)
        active = evals > 1e-15
        if not np.any(active):
            return np.zeros((1, len(self.generators))), np.ones(1)
        factor = evecs[:, active] * np.sqrt(evals[active])
        t, w = hermgauss(nodes)
        rank = int(active.sum())
        grids = np.meshgrid(*([t] * rank), indexing='ij')
        points = np.column_stack([g.ravel() for g in grids])
        weights = np.prod(np.meshgrid(*([w] * rank), indexing='ij'), axis=0).ravel() / np.pi ** (rank / 2)
        return np.sqrt(2) * points @ factor.T, weights

    def unitaries(self, zeta: np.ndarray, cutoff: int) -> List[Tuple[int, np.ndarray]]:
        """exp(-i ζ·g) grouped per target mode"""
        q, p = quadratures(cutoff)
        local = {'q': q.data, 'p': p.data, 'n': np.diag(np.arange(cutoff, dtype=float))}
        per_mode: Dict[int, np.ndarray] = {}
        for value, gen, mode in zip(zeta, self.generators, self.modes):
            per_mode[mode] = per_mode.get(mode, 0) + value * local[gen]
        return [(mode, unitary_from_hermitian(h)) for mode, h in sorted(per_mode.items())]

    def generator_operators(self, arch: Architecture):
        """Hermitian generators lifted onto the architecture layout"""
        q, p = quadratures(arch.cutoff)
        local = {'q': q, 'p': p, 'n': number(arch.cutoff)}
        return [local[g].lift(arch.layout, (m,)) for g, m in zip(self.generators, self.modes)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'generators': list(self.generators),
            'covariance': self.covariance.tolist(),
            'modes': list(self.modes),
        }


# --- forward pipeline -----------------------------------------------------

def column_leakage(vectors: np.ndarray, arch: Architecture) -> float:
    """Largest top-two-level population over qumodes and columns"""
    layout = arch.layout
    probs = (np.abs(vectors) ** 2).reshape(*layout.dims, vectors.shape[1])
    worst = 0.0
    for mode in layout.qumodes:
        top = np.take(probs, [layout.dims[mode] - 2, layout.dims[mode] - 1], axis=mode)
        worst = max(worst, float(np.max(top.sum(axis=tuple(range(len(layout.dims)))))))
    return worst


def check_columns(vectors: np.ndarray, arch: Architecture) -> np.ndarray:
    leak = column_leakage(vectors, arch)
    if leak >= setting('LEAKAGE_TOLERANCE', 1e-8):
        raise LeakageError(f"Top-level Fock population {leak:.3e} at cutoff {arch.cutoff}", leak, arch.cutoff)
    return vectors


def displaced_columns(probe: np.ndarray, points: np.ndarray, arch: Architecture) -> np.ndarray:
    """D(x_k)|ψ_p> for every row x_k of ``points``, as columns"""
    if points.shape[1] != 2 * arch.data_modes:
        raise ShapeError(f"Displacements of length {points.shape[1]} for {arch.data_modes} data modes")
    layout = arch.layout
    return np.column_stack([
        displace_vectors(probe[:, None], x, layout, arch.data_mode_indices)[:, 0] for x in points
    ])


def noisy_columns(columns: np.ndarray, noise: NoiseModel, zetas: np.ndarray,
                  arch: Architecture) -> np.ndarray:
    """U_ζ applied to every column for every node; node-major column blocks"""
    layout = arch.layout
    blocks = []
    for zeta in zetas:
        block = columns
        for mode, unitary in noise.unitaries(zeta, arch.cutoff):
            block = apply_local(unitary, (mode,), layout.dims, block)
        blocks.append(block)
    return np.hstack(blocks)


def decision_probabilities(vectors: np.ndarray, arch: Architecture, labels: int = 2) -> np.ndarray:
    """
    Label probabilities (labels, K) for output columns. Decision-qubit bits are
    read with the first decision qubit most significant; outcomes ≥ labels are
    attributed to the last label.
    """
    capacity = 2 ** len(arch.decision_qubits)
    if labels > capacity:
        raise ConfigError(f"{labels} labels need at least {math.ceil(math.log2(labels))} decision qubits",
                          'architecture.decision_qubits')
    layout = arch.layout
    k = vectors.shape[1]
    probs = (np.abs(vectors) ** 2).reshape(*layout.dims, k)
    keep = [arch.qubit_index(q) for q in arch.decision_qubits]
    others = tuple(a for a in range(len(layout.dims)) if a not in keep)
    marginal = probs.sum(axis=others)  # remaining axes follow ascending subsystem order
    order = np.argsort(np.argsort(keep))
    marginal = np.transpose(marginal, list(order) + [len(keep)]).reshape(capacity, k)
    out = marginal[:labels].copy()
    out[labels - 1] += marginal[labels:].sum(axis=0)
    return out


def output_state(x: Sequence[float], theta_p: AnsatzParams, theta_m: AnsatzParams,
                 arch: Architecture) -> QuantumState:
    """V(θ_m) D(x) U(θ_p) |vac, 0>"""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ContractError("Displacement vector is not finite")
    probe = probe_state(theta_p, arch).data
    column = displaced_columns(probe, x[None, :], arch)
    out = check_columns(apply_ansatz(theta_m, arch, column), arch)
    return QuantumState(arch.layout, out[:, 0])


def classification_prob(x: Sequence[float], params: SystemParams, arch: Architecture,
                        labels: int = 2) -> np.ndarray:
    state = output_state(x, params.probe, params.measurement, arch)
    return decision_probabilities(state.data[:, None], arch, labels)[:, 0]


def correct_probability(outputs: np.ndarray, ensemble: LabeledDisplacementEnsemble, arch: Architecture,
                        node_weights: Optional[np.ndarray] = None) -> float:
    """
    Prior- and weight-averaged probability of a correct decision. ``outputs``
    holds the output columns of every atom of every class in order, repeated
    node-major when ``node_weights`` is given.
    """
    probs = decision_probabilities(outputs, arch, ensemble.labels)
    sizes = [c.size for c in ensemble.classes]
    total = sum(sizes)
    node_weights = np.ones(1) if node_weights is None else node_weights
    correct = 0.0
    for node, nw in enumerate(node_weights):
        start = node * total
        for label, atoms in enumerate(ensemble.classes):
            block = probs[label, start:start + atoms.size]
            correct += nw * ensemble.priors[label] * float(np.dot(atoms.weights, block))
            start += atoms.size
    return correct


def ensemble_points(ensemble: LabeledDisplacementEnsemble) -> np.ndarray:
    return np.vstack([c.points for c in ensemble.classes])


def error_from_probe(probe: np.ndarray, theta_m: AnsatzParams, ensemble: LabeledDisplacementEnsemble,
                     arch: Architecture, check: bool = True) -> float:
    columns = displaced_columns(probe, ensemble_points(ensemble), arch)
    outputs = apply_ansatz(theta_m, arch, columns)
    if check:
        check_columns(outputs, arch)
    return float(np.clip(1.0 - correct_probability(outputs, ensemble, arch), 0.0, 1.0))


def error_probability(ensemble: LabeledDisplacementEnsemble, params: SystemParams,
                      arch: Architecture) -> float:
    """Misclassification probability 1 - E[P(ỹ = y | x)] over the discretised ensemble"""
    _check_modes(ensemble, arch)
    probe = probe_state(params.probe, arch).data
    return error_from_probe(probe, params.measurement, ensemble, arch)


def noisy_error_from_probe(probe: np.ndarray, theta_m: AnsatzParams, ensemble: LabeledDisplacementEnsemble,
                           arch: Architecture, noise: NoiseModel, nodes: Optional[int] = None) -> float:
    zetas, weights = noise.quadrature(nodes)
    columns = displaced_columns(probe, ensemble_points(ensemble), arch)
    outputs = apply_ansatz(theta_m, arch, noisy_columns(columns, noise, zetas, arch))
    check_columns(outputs, arch)
    return float(np.clip(1.0 - correct_probability(outputs, ensemble, arch, weights), 0.0, 1.0))


def noisy_error_probability(ensemble: LabeledDisplacementEnsemble, params: SystemParams,
                            arch: Architecture, noise: NoiseModel, check_convergence: bool = True) -> float:
    """
    Error probability averaged over the noise distribution by Gauss-Hermite
    quadrature. The rule is accepted when doubling the node count changes the
    result by at most NOISE_QUADRATURE_TOLERANCE.
    """
    _check_modes(ensemble, arch)
    if noise.is_zero:
        return error_probability(ensemble, params, arch)
    limit = setting('NOISE_MAX_COVARIANCE', 0.02)
    if np.linalg.norm(noise.covariance, 2) > limit:
        raise ContractError(f"Noise covariance norm exceeds {limit}")
    if any(m >= arch.data_modes for m in noise.modes):
        raise ContractError("Noise generators must act on data modes")
    probe = probe_state(params.probe, arch).data
    nodes = noise.nodes or setting('NOISE_QUADRATURE_NODES', 15)
    value = noisy_error_from_probe(probe, params.measurement, ensemble, arch, noise, nodes)
    if check_convergence:
        refined = noisy_error_from_probe(probe, params.measurement, ensemble, arch, noise, 2 * nodes)
        tolerance = setting('NOISE_QUADRATURE_TOLERANCE', 1e-8)
        if abs(refined - value) > tolerance:
            raise PrecisionError(f"Noise quadrature changed by {abs(refined - value):.3e} when doubling "
                                 f"{nodes} nodes")
    return value


def class_vectors(probe: np.ndarray, ensemble: LabeledDisplacementEnsemble,
                  arch: Architecture) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Displaced probe columns and atom weights per label"""
    return [(displaced_columns(probe, c.points, arch), c.weights) for c in ensemble.classes]


def class_states(probe: QuantumState, ensemble: LabeledDisplacementEnsemble,
                 arch: Architecture) -> List[QuantumState]:
    """Class-averaged density matrices Σ_k w_k D(x_k) ρ_p D(x_k)† before the measurement circuit"""
    states = []
    for columns, weights in class_vectors(probe.data, ensemble, arch):
        rho = (columns * weights) @ columns.conj().T
        states.append(QuantumState(arch.layout, rho))
    return states


def _check_modes(ensemble: LabeledDisplacementEnsemble, arch: Architecture):
    if ensemble.data_modes != arch.data_modes:
        raise ConfigError(f"Task has {ensemble.data_modes} data modes, architecture has {arch.data_modes}",
                          'architecture.data_modes')
