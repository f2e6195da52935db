"""
Layered ECD + qubit-rotation ansatz.

Each layer applies every qubit rotation first and then every ECD coupling of
that layer, so the unitary is U = G_last ... G_first. The flat parameter
vector of an ansatz lists, layer by layer, (Re β, Im β) for each coupling
followed by (ξ, φ) for each qubit.
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import ConfigError, ContractError, ShapeError
from .base import setting
from .fock import (
    QUBIT,
    QUMODE,
    Operator,
    QuantumState,
    SubsystemLayout,
    apply_local,
    displacement_matrix,
    mean_occupation,
)

logger = logging.getLogger(__name__)

Coupling = Tuple[int, int]  # (qubit, mode)

_SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
_SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_RAISE = np.array([[0, 0], [1, 0]], dtype=complex)   # |1><0|
_LOWER = np.array([[0, 1], [0, 0]], dtype=complex)   # |0><1|


@dataclass(frozen=True)
class Architecture:
    """
    Qumode/qubit register and coupling pattern of one variational circuit.

    Modes are numbered data modes first, then ancilla modes. ``couplings``
    holds one tuple of (qubit, mode) pairs per layer; when omitted, qubit 0
    couples to one mode per layer, cycling over all modes.
    """
    data_modes: int = 1
    ancilla_modes: int = 0
    qubits: int = 1
    layers: int = 8
    cutoff: int = 30
    decision_qubits: Tuple[int, ...] = (0,)
    couplings: Optional[Tuple[Tuple[Coupling, ...], ...]] = None

    def __post_init__(self):
        if self.data_modes < 1:
            raise ConfigError("At least one data mode is required", 'architecture.data_modes')
        if self.ancilla_modes < 0:
            raise ConfigError("Ancilla mode count cannot be negative", 'architecture.ancilla_modes')
        if self.qubits < 1:
            raise ConfigError("At least one qubit is required", 'architecture.qubits')
        if self.layers < 1:
            raise ConfigError("At least one layer is required", 'architecture.layers')
        decision = tuple(int(q) for q in self.decision_qubits)
        if not decision or any(not 0 <= q < self.qubits for q in decision):
            raise ConfigError(f"Decision qubits {decision} outside 0..{self.qubits - 1}",
                              'architecture.decision_qubits')
        object.__setattr__(self, 'decision_qubits', decision)

        if self.couplings is None:
            couplings = tuple(((0, layer % self.n_modes),) for layer in range(self.layers))
        else:
            couplings = tuple(tuple((int(q), int(m)) for q, m in layer) for layer in self.couplings)
        if len(couplings) != self.layers:
            raise ConfigError(f"{len(couplings)} coupling layers for {self.layers} layers",
                              'architecture.couplings')
        if len({len(layer) for layer in couplings}) != 1 or not couplings[0]:
            raise ConfigError("Every layer needs the same non-zero number of couplings",
                              'architecture.couplings')
        for layer in couplings:
            for q, m in layer:
                if not (0 <= q < self.qubits and 0 <= m < self.n_modes):
                    raise ConfigError(f"Coupling (qubit {q}, mode {m}) outside the register",
                                      'architecture.couplings')
        object.__setattr__(self, 'couplings', couplings)

    @classmethod
    def non_ea(cls, data_modes: int = 1, layers: int = 8, cutoff: int = 30, **kwargs) -> 'Architecture':
        return cls(data_modes=data_modes, ancilla_modes=0, layers=layers, cutoff=cutoff, **kwargs)

    @classmethod
    def ea(cls, data_modes: int = 1, ancilla_modes: int = 1, layers: int = 8, cutoff: int = 30,
           **kwargs) -> 'Architecture':
        if ancilla_modes < 1:
            raise ConfigError("Entanglement-assisted circuits need an ancilla mode",
                              'architecture.ancilla_modes')
        return cls(data_modes=data_modes, ancilla_modes=ancilla_modes, layers=layers, cutoff=cutoff,
                   **kwargs)

    @property
    def ea_flag(self) -> bool:
        return self.ancilla_modes > 0

    @property
    def n_modes(self) -> int:
        return self.data_modes + self.ancilla_modes

    @property
    def layout(self) -> SubsystemLayout:
        return SubsystemLayout.build(self.n_modes, self.cutoff, self.qubits)

    @property
    def data_mode_indices(self) -> Tuple[int, ...]:
        return tuple(range(self.data_modes))

    def qubit_index(self, qubit: int) -> int:
        """Subsystem index of a qubit within the layout"""
        return self.n_modes + qubit

    @property
    def couplings_per_layer(self) -> int:
        return len(self.couplings[0])

    @property
    def params_per_layer(self) -> int:
        return 2 * self.couplings_per_layer + 2 * self.qubits

    @property
    def n_params(self) -> int:
        return self.layers * self.params_per_layer

    def with_cutoff(self, cutoff: int) -> 'Architecture':
        return Architecture(self.data_modes, self.ancilla_modes, self.qubits, self.layers, cutoff,
                            self.decision_qubits, self.couplings)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'data_modes': self.data_modes,
            'ancilla_modes': self.ancilla_modes,
            'qubits': self.qubits,
            'layers': self.layers,
            'cutoff': self.cutoff,
            'decision_qubits': list(self.decision_qubits),
            'couplings': [[list(pair) for pair in layer] for layer in self.couplings],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Architecture':
        couplings = data.get('couplings')
        return cls(
            data_modes=data.get('data_modes', 1),
            ancilla_modes=data.get('ancilla_modes', 0),
            qubits=data.get('qubits', 1),
            layers=data.get('layers', 8),
            cutoff=data.get('cutoff', setting('FOCK_CUTOFF', 30)),
            decision_qubits=tuple(data.get('decision_qubits', (0,))),
            couplings=None if couplings is None else tuple(tuple(tuple(p) for p in layer) for layer in couplings),
        )


@dataclass(frozen=True, eq=False)
class AnsatzParams:
    """β per (layer, coupling); ξ and φ per (layer, qubit)"""
    betas: np.ndarray
    xis: np.ndarray
    phis: np.ndarray

    def __post_init__(self):
        betas = np.atleast_2d(np.asarray(self.betas, dtype=complex))
        xis = np.atleast_2d(np.asarray(self.xis, dtype=float))
        phis = np.atleast_2d(np.asarray(self.phis, dtype=float))
        if xis.shape != phis.shape or betas.shape[0] != xis.shape[0]:
            raise ShapeError(f"Inconsistent parameter shapes {betas.shape}, {xis.shape}, {phis.shape}")
        object.__setattr__(self, 'betas', betas)
        object.__setattr__(self, 'xis', xis)
        object.__setattr__(self, 'phis', phis)

    @property
    def layers(self) -> int:
        return self.betas.shape[0]

    def check(self, arch: Architecture) -> 'AnsatzParams':
        if self.betas.shape != (arch.layers, arch.couplings_per_layer) or \
                self.xis.shape != (arch.layers, arch.qubits):
            raise ContractError(
                f"Parameters of shape {self.betas.shape}/{self.xis.shape} do not fit "
                f"{arch.layers} layers x {arch.couplings_per_layer} couplings x {arch.qubits} qubits"
            )
        return self

    def pack(self) -> np.ndarray:
        rows = []
        for layer in range(self.layers):
            ri = np.column_stack([self.betas[layer].real, self.betas[layer].imag]).ravel()
            angles = np.column_stack([self.xis[layer], self.phis[layer]]).ravel()
            rows.append(np.concatenate([ri, angles]))
        return np.concatenate(rows)

    @classmethod
    def unpack(cls, vector: Sequence[float], arch: Architecture) -> 'AnsatzParams':
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (arch.n_params,):
            raise ContractError(f"Parameter vector of length {vector.size}, expected {arch.n_params}")
        grid = vector.reshape(arch.layers, arch.params_per_layer)
        nb = 2 * arch.couplings_per_layer
        betas = grid[:, 0:nb:2] + 1j * grid[:, 1:nb:2]
        return cls(betas, grid[:, nb::2], grid[:, nb + 1::2])

    @classmethod
    def zeros(cls, arch: Architecture) -> 'AnsatzParams':
        return cls.unpack(np.zeros(arch.n_params), arch)

    @classmethod
    def random(cls, arch: Architecture, rng: np.random.Generator, beta_scale: float = 0.3) -> 'AnsatzParams':
        """β complex normal with standard deviation ``beta_scale``; angles uniform on [0, 2π)"""
        shape = (arch.layers, arch.couplings_per_layer)
        sigma = beta_scale / np.sqrt(2)
        betas = rng.normal(0.0, sigma, shape) + 1j * rng.normal(0.0, sigma, shape)
        angles = rng.uniform(0.0, 2 * np.pi, (2, arch.layers, arch.qubits))
        return cls(betas, angles[0], angles[1])


@dataclass(frozen=True, eq=False)
class SystemParams:
    """Probe parameters θ_p and measurement parameters θ_m"""
    probe: AnsatzParams
    measurement: AnsatzParams
    meta: Dict[str, Any] = field(default_factory=dict)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.probe.pack(), self.measurement.pack()])

    @classmethod
    def from_vector(cls, vector: Sequence[float], arch: Architecture) -> 'SystemParams':
        vector = np.asarray(vector, dtype=float)
        if vector.shape != (2 * arch.n_params,):
            raise ContractError(f"System vector of length {vector.size}, expected {2 * arch.n_params}")
        return cls(AnsatzParams.unpack(vector[:arch.n_params], arch),
                   AnsatzParams.unpack(vector[arch.n_params:], arch))

    @classmethod
    def random(cls, arch: Architecture, rng: np.random.Generator) -> 'SystemParams':
        return cls(AnsatzParams.random(arch, rng), AnsatzParams.random(arch, rng))

    @classmethod
    def zeros(cls, arch: Architecture) -> 'SystemParams':
        return cls(AnsatzParams.zeros(arch), AnsatzParams.zeros(arch))

    def to_dict(self, arch: Architecture) -> Dict[str, Any]:
        return {
            'architecture': arch.to_dict(),
            'probe': [float(v) for v in self.probe.pack()],
            'measurement': [float(v) for v in self.measurement.pack()],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> Tuple['SystemParams', Architecture]:
        try:
            arch = Architecture.from_dict(data['architecture'])
            params = cls(AnsatzParams.unpack(data['probe'], arch),
                         AnsatzParams.unpack(data['measurement'], arch))
        except KeyError as e:
            raise ConfigError(f"Parameter document is missing {e}", str(e).strip("'"))
        return params, arch


# --- gates ----------------------------------------------------------------

def ecd_matrix(beta: complex, d: int) -> np.ndarray:
    """D(β) ⊗ |1><0| + D(-β) ⊗ |0><1| in (qumode, qubit) tensor order"""
    return np.kron(displacement_matrix(beta, d), _RAISE) + np.kron(displacement_matrix(-beta, d), _LOWER)


@lru_cache(maxsize=4096)
def _rotation_matrix(xi: float, phi: float) -> np.ndarray:
    axis = np.cos(phi) * _SIGMA_X + np.sin(phi) * _SIGMA_Y
    matrix = np.cos(xi / 2) * np.eye(2) - 1j * np.sin(xi / 2) * axis
    matrix.setflags(write=False)
    return matrix


def rotation_matrix(xi: float, phi: float) -> np.ndarray:
    return _rotation_matrix(float(xi), float(phi))


def ecd_gate(beta: complex, layout: SubsystemLayout, mode: int, qubit: int) -> Operator:
    layout.check_targets((mode,), QUMODE)
    layout.check_targets((qubit,), QUBIT)
    return Operator(layout, ecd_matrix(beta, layout.dims[mode]), (mode, qubit), unitary=True).verify()


def rotation_gate(xi: float, phi: float, layout: SubsystemLayout, qubit: int) -> Operator:
    layout.check_targets((qubit,), QUBIT)
    return Operator(layout, rotation_matrix(xi, phi), (qubit,), unitary=True)


def apply_ansatz(params: AnsatzParams, arch: Architecture, vectors: np.ndarray) -> np.ndarray:
    """Apply the layered circuit to a batch of column vectors"""
    params.check(arch)
    dims = arch.layout.dims
    out = vectors
    for layer in range(arch.layers):
        for qubit in range(arch.qubits):
            out = apply_local(rotation_matrix(params.xis[layer, qubit], params.phis[layer, qubit]),
                              (arch.qubit_index(qubit),), dims, out)
        for (qubit, mode), beta in zip(arch.couplings[layer], params.betas[layer]):
            out = apply_local(ecd_matrix(beta, arch.cutoff), (mode, arch.qubit_index(qubit)), dims, out)
    return out


def apply_circuit(params: AnsatzParams, arch: Architecture, state: QuantumState) -> QuantumState:
    if state.layout != arch.layout:
        raise ShapeError("State layout does not match the architecture")
    if state.is_pure:
        return QuantumState(state.layout, apply_ansatz(params, arch, state.data[:, None])[:, 0])
    left = apply_ansatz(params, arch, state.data)
    return QuantumState(state.layout, apply_ansatz(params, arch, left.conj().T).conj().T)


def build_unitary(params: AnsatzParams, arch: Architecture) -> Operator:
    """Dense circuit unitary over the full layout"""
    layout = arch.layout
    matrix = apply_ansatz(params, arch, np.eye(layout.total_dim, dtype=complex))
    return Operator(layout, matrix, unitary=True)


def probe_state(theta_p: AnsatzParams, arch: Architecture, check_leakage: bool = True) -> QuantumState:
    """U(θ_p) |vac> ⊗ |0...0>; raises LeakageError when the cutoff is too small"""
    state = apply_circuit(theta_p, arch, QuantumState.vacuum(arch.layout))
    if check_leakage:
        state.check_leakage()
    return state


def probe_energy(state: QuantumState, arch: Architecture) -> float:
    """Mean total occupation of the data modes"""
    return mean_occupation(state, arch.data_mode_indices)
