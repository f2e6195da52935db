"""
Closed-form baselines, Helstrom limits and the symplectic data-transform
calculus.

Phase-space vectors are ordered (q₁, p₁, q₂, p₂, ...) with the vacuum
covariance I/2; data vectors use the same ordering in amplitude units
(Re α, Im α) per mode.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import brentq, minimize_scalar
from scipy.special import erfc

from ..exceptions import ContractError, TransformError, UndefinedError
from .base import setting
from .circuit import Architecture, SystemParams, probe_state
from .fock import (
    QuantumState,
    SubsystemLayout,
    covariance,
    displace_vectors,
    displacement_matrix,
    gaussian_ops,
    product_state,
    squeezed_vacuum,
)
from .tasks import (
    ATOMS,
    CIRCLE,
    ClassAtoms,
    LabeledDisplacementEnsemble,
    NoiseModel,
    TaskSpec,
    class_vectors,
    make_task,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]


def squeezing_for_energy(n_s: float) -> float:
    """r with sinh²r = N_S"""
    if n_s < 0:
        raise ContractError(f"Energy budget must be non-negative, got {n_s}")
    return float(np.arcsinh(np.sqrt(n_s)))


# --- binary displacement baselines ---------------------------------------

def gaussian_binary_error(epsilon: ArrayLike, n_s: float):
    """Squeezed probe with homodyne readout: ½ erfc(√2 ε e^r)"""
    eps = np.asarray(epsilon, dtype=float)
    if np.any(eps < 0):
        raise ContractError("epsilon must be non-negative")
    r = squeezing_for_energy(n_s)
    value = 0.5 * erfc(np.sqrt(2) * eps * np.exp(r))
    return float(value) if value.ndim == 0 else value


def helstrom_pure(overlap_squared: float, priors: Tuple[float, float] = (0.5, 0.5)) -> float:
    p0, p1 = priors
    return float(0.5 * (1.0 - np.sqrt(max(0.0, 1.0 - 4.0 * p0 * p1 * overlap_squared))))


def helstrom_squeezed_binary(epsilon: ArrayLike, n_s: float):
    """Helstrom limit for D(±ε) on a squeezed vacuum with sinh²r = N_S"""
    eps = np.asarray(epsilon, dtype=float)
    r = squeezing_for_energy(n_s)
    overlap = np.exp(-4.0 * eps ** 2 * np.exp(2 * r))
    value = 0.5 * (1.0 - np.sqrt(1.0 - overlap))
    return float(value) if value.ndim == 0 else value


def squeezed_photon_counting_error(epsilon: float, n_s: float, cutoff: Optional[int] = None) -> float:
    """
    Squeezed probe, pre-count displacement γ along q, photon counting with a
    maximum-likelihood decision on the count.
    """
    if epsilon == 0:
        return 0.5
    d = cutoff or setting('FOCK_CUTOFF_MAX', 60)
    probe = squeezed_vacuum(squeezing_for_energy(n_s), d).data

    def error(gamma: float) -> float:
        plus = np.abs(displacement_matrix(gamma + epsilon, d) @ probe) ** 2
        minus = np.abs(displacement_matrix(gamma - epsilon, d) @ probe) ** 2
        return float(0.5 * np.minimum(plus, minus).sum())

    limit = 0.5 * math.sqrt(d) - epsilon
    grid = np.linspace(0.0, max(limit, 0.1), 61)[1:]
    values = [error(g) for g in grid]
    best = int(np.argmin(values))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, grid.size - 1)]
    result = minimize_scalar(error, bounds=(lo, hi), method='bounded', options={'xatol': 1e-8})
    return float(min(result.fun, values[best]))


# --- Helstrom limits ------------------------------------------------------

def _as_density(state) -> np.ndarray:
    if isinstance(state, QuantumState):
        return state.density()
    rho = np.asarray(state, dtype=complex)
    if rho.ndim == 1:
        return np.outer(rho, rho.conj())
    return rho


def _check_density(rho: np.ndarray, tol: float = 1e-9):
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ContractError(f"Density matrix must be square, got shape {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > tol:
        raise ContractError("Density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise ContractError(f"Density matrix trace {np.trace(rho).real:.9f} differs from 1")
    if np.min(np.linalg.eigvalsh(rho)) < -tol:
        raise ContractError("Density matrix has negative eigenvalues")


def helstrom_binary(rho0, rho1, priors: Tuple[float, float] = (0.5, 0.5)) -> float:
    """½(1 - ‖p₀ρ₀ - p₁ρ₁‖₁) from the eigenvalues of the weighted difference"""
    a, b = _as_density(rho0), _as_density(rho1)
    if a.shape != b.shape:
        raise ContractError("Helstrom states must share a layout")
    _check_density(a)
    _check_density(b)
    p0, p1 = priors
    norm = np.abs(np.linalg.eigvalsh(p0 * a - p1 * b)).sum()
    return float(np.clip(0.5 * (1.0 - norm), 0.0, min(p0, p1)))


def helstrom_from_vectors(columns0: np.ndarray, weights0: np.ndarray, columns1: np.ndarray,
                          weights1: np.ndarray, priors: Tuple[float, float] = (0.5, 0.5)) -> float:
    """
    Helstrom error for two mixtures of pure states given as weighted columns.

    The trace norm of Σ p₀w|ψ⟩⟨ψ| - Σ p₁w|φ⟩⟨φ| = C J C† equals that of
    G^{1/2} J G^{1/2} with G = C†C, which stays small when the layout is large.
    """
    p0, p1 = priors
    c = np.hstack([columns0 * np.sqrt(p0 * np.asarray(weights0)),
                   columns1 * np.sqrt(p1 * np.asarray(weights1))])
    signs = np.concatenate([np.ones(columns0.shape[1]), -np.ones(columns1.shape[1])])
    evals, evecs = np.linalg.eigh(c.conj().T @ c)
    root = (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.conj().T
    norm = np.abs(np.linalg.eigvalsh(root @ (signs[:, None] * root))).sum()
    return float(np.clip(0.5 * (1.0 - norm), 0.0, min(p0, p1)))


def helstrom_ensemble(probe: QuantumState, ensemble: LabeledDisplacementEnsemble,
                      modes: Optional[Sequence[int]] = None) -> float:
    """Helstrom limit of the class mixtures of a displaced pure probe"""
    if ensemble.labels != 2:
        raise ContractError("Helstrom limits are only defined here for two labels")
    if not probe.is_pure:
        raise ContractError("helstrom_ensemble expects a pure probe")
    modes = tuple(modes) if modes is not None else probe.layout.qumodes[:ensemble.data_modes]
    blocks = []
    for atoms in ensemble.classes:
        cols = np.column_stack([
            displace_vectors(probe.data[:, None], x, probe.layout, modes)[:, 0] for x in atoms.points
        ])
        blocks.append((cols, atoms.weights))
    (c0, w0), (c1, w1) = blocks
    return helstrom_from_vectors(c0, w0, c1, w1, tuple(ensemble.priors))


def induced_helstrom(params: SystemParams, arch: Architecture, ensemble: LabeledDisplacementEnsemble) -> float:
    """Helstrom limit of the class-averaged states the trained probe induces"""
    if ensemble.labels != 2:
        raise ContractError("Helstrom limits are only defined here for two labels")
    probe = probe_state(params.probe, arch).data
    (c0, w0), (c1, w1) = class_vectors(probe, ensemble, arch)
    return helstrom_from_vectors(c0, w0, c1, w1, tuple(ensemble.priors))


def squeezed_probe(n_s: float, modes: int, cutoff: int) -> QuantumState:
    """Product of squeezed vacua sharing the energy budget equally"""
    r = squeezing_for_energy(n_s / modes)
    return product_state(*[squeezed_vacuum(r, cutoff) for _ in range(modes)])


def squeezed_ensemble_helstrom(ensemble: LabeledDisplacementEnsemble, n_s: float,
                               cutoff: Optional[int] = None) -> float:
    cutoff = cutoff or setting('FOCK_CUTOFF', 30)
    return helstrom_ensemble(squeezed_probe(n_s, ensemble.data_modes, cutoff), ensemble)


# --- Laguerre analysis and number interferometry -------------------------

def laguerre(n: int, x: ArrayLike):
    """L_n(x) by the three-term recurrence"""
    if n < 0 or int(n) != n:
        raise ContractError(f"Laguerre degree must be a non-negative integer, got {n}")
    x = np.asarray(x, dtype=float)
    prev, cur = np.ones_like(x), 1.0 - x
    if n == 0:
        cur = prev
    for k in range(1, int(n)):
        prev, cur = cur, ((2 * k + 1 - x) * cur - k * prev) / (k + 1)
    return float(cur) if cur.ndim == 0 else cur


def laguerre_smallest_root(n: int) -> Optional[float]:
    """Smallest positive root of L_n, bracketed by [1/n, 2/(n+1)]; None for n = 0"""
    if n == 0:
        return None
    if n == 1:
        return 1.0
    return float(brentq(lambda x: laguerre(n, x), 1.0 / n, 2.0 / (n + 1), xtol=1e-15))


def number_interferometry_error(n: int, epsilon: ArrayLike):
    """½ e^{-ε²} L_n(ε²)²: Fock |n⟩ probe against a uniform circle of radius ε"""
    eps2 = np.asarray(epsilon, dtype=float) ** 2
    value = 0.5 * np.exp(-eps2) * laguerre(n, eps2) ** 2
    return float(value) if np.ndim(value) == 0 else value


def number_interferometry_curve(n: int, epsilon: ArrayLike):
    """
    Beamsplitter-assisted number interferometry: the signal can be attenuated
    down to the first Laguerre zero, so the error stays zero past threshold.
    """
    root = laguerre_smallest_root(n)
    eps = np.asarray(epsilon, dtype=float)
    if root is not None:
        eps = np.minimum(eps, np.sqrt(root))
    return number_interferometry_error(n, eps)


def required_fock(epsilon: float) -> int:
    """Smallest n with ε² ≥ 2/(n+1), which guarantees a zero-error root"""
    if epsilon == 0:
        raise UndefinedError("required_fock is undefined at epsilon = 0")
    if epsilon < 0:
        raise ContractError(f"epsilon must be positive, got {epsilon}")
    return max(0, math.ceil(2.0 / epsilon ** 2 - 1.0 - 1e-12))


def simulate_number_interferometer(n: int, epsilon: ArrayLike, cutoff: int = 32,
                                   theta: float = math.pi / 4, phases: int = 8):
    """
    Two-mode Fock simulation: |n⟩|0⟩, beamsplitter θ, displacement ε/cosθ on
    the first arm, inverse beamsplitter, POVM |n⟩⟨n| ⊗ I deciding "no signal".
    Returns ½ P(|n⟩⟨n| | circle class) averaged over equiangular phases.
    """
    layout = SubsystemLayout.build(2, cutoff)
    forward = gaussian_ops('beamsplitter', layout, (0, 1), theta)
    backward = forward.dagger()
    start = QuantumState.basis(layout, [n, 0])
    split = forward.apply(start).data
    eps = np.atleast_1d(np.asarray(epsilon, dtype=float))
    out = np.empty(eps.size)
    for i, e in enumerate(eps):
        clicks = []
        for k in range(phases):
            alpha = e / math.cos(theta) * np.exp(2j * np.pi * k / phases)
            shifted = displace_vectors(split[:, None], [alpha.real, alpha.imag], layout, (0,))
            final = backward.apply_vectors(shifted)[:, 0].reshape(cutoff, cutoff)
            clicks.append(float(np.sum(np.abs(final[n]) ** 2)))
        out[i] = 0.5 * np.mean(clicks)
    return float(out[0]) if np.ndim(epsilon) == 0 else out


@dataclass(frozen=True)
class OnStateResult:
    error: float
    n: int
    w: float


def on_state(n: int, w: float, cutoff: int) -> QuantumState:
    """(w|0⟩ + |n⟩)/√(1 + w²)"""
    vec = np.zeros(cutoff, dtype=complex)
    vec[0] += w
    vec[n] += 1.0
    return QuantumState(SubsystemLayout.single_mode(cutoff), vec / np.linalg.norm(vec))


def on_state_error(epsilon: float, n_s: float, cutoff: Optional[int] = None,
                   atoms: Optional[int] = None) -> OnStateResult:
    """
    Best Helstrom error of ON states on the circle-vs-vacuum task under the
    energy constraint N/(1+w²) ≤ N_S, searched over N ≤ d-2 and a log grid in w.
    """
    cutoff = cutoff or setting('FOCK_CUTOFF', 30)
    ensemble = make_task(TaskSpec(family=CIRCLE, epsilon=epsilon, atoms=atoms))
    tol = setting('LEAKAGE_TOLERANCE', 1e-8)
    if n_s <= 0:
        return OnStateResult(helstrom_ensemble(on_state(0, 0.0, cutoff), ensemble), 0, 0.0)
    best = OnStateResult(0.5, 0, 0.0)
    for n in range(max(1, math.ceil(n_s)), cutoff - 1):
        w_min = math.sqrt(max(n / n_s - 1.0, 0.0))
        for w in np.unique(np.concatenate([[w_min], max(w_min, 1e-2) * np.logspace(0, 1.5, 12)])):
            probe = on_state(n, float(w), cutoff)
            top = np.abs(displacement_matrix(epsilon, cutoff) @ probe.data)[-2:]
            if np.sum(top ** 2) >= tol:
                continue
            err = helstrom_ensemble(probe, ensemble)
            if err < best.error:
                best = OnStateResult(err, n, float(w))
    logger.info(f"ON-state baseline at epsilon={epsilon}: P_E={best.error:.3e} (N={best.n}, w={best.w:.3f})")
    return best


# --- thresholds and noise bounds ------------------------------------------

def threshold_asymptotic(n_s: ArrayLike):
    """ε_th = 1/(2√max⟨p̂²⟩) for a squeezed probe of energy N_S"""
    n = np.asarray(n_s, dtype=float)
    if np.any(n < 0):
        raise ContractError("Energy budget must be non-negative")
    value = np.sqrt((1.0 + 2.0 * n - 2.0 * np.sqrt(n * (n + 1.0))) / 2.0)
    return float(value) if value.ndim == 0 else value


def theorem2_bound(noise_cov, generator_cov) -> float:
    """Σ_ij Cov(ζ_i, ζ_j) Cov(g_i, g_j)"""
    noise_cov = np.atleast_2d(np.asarray(noise_cov, dtype=float))
    generator_cov = np.atleast_2d(np.asarray(generator_cov, dtype=float))
    if noise_cov.shape != generator_cov.shape or noise_cov.shape[0] != noise_cov.shape[1]:
        raise ContractError(f"Covariance shapes {noise_cov.shape} and {generator_cov.shape} differ")
    if np.min(np.linalg.eigvalsh((noise_cov + noise_cov.T) / 2)) < -1e-12:
        raise ContractError("Noise covariance must be positive semidefinite")
    return float(np.sum(noise_cov * generator_cov))


def generator_covariance(states: Iterable[QuantumState], weights: Sequence[float], generators) -> np.ndarray:
    """Weighted average of the generator covariance matrices over states"""
    total = None
    for state, weight in zip(states, weights):
        cov = weight * covariance(state, generators)
        total = cov if total is None else total + cov
    return total


def noise_bound(params: SystemParams, arch: Architecture, ensemble: LabeledDisplacementEnsemble,
                noise: NoiseModel) -> Tuple[float, np.ndarray]:
    """Bound and generator covariance averaged over the displaced probe states"""
    probe = probe_state(params.probe, arch).data
    layout = arch.layout
    states, weights = [], []
    for prior, (columns, atom_weights) in zip(ensemble.priors, class_vectors(probe, ensemble, arch)):
        for column, w in zip(columns.T, atom_weights):
            states.append(QuantumState(layout, column))
            weights.append(prior * w)
    gen_cov = generator_covariance(states, weights, noise.generator_operators(arch))
    return theorem2_bound(noise.covariance, gen_cov), gen_cov


# --- symplectic calculus --------------------------------------------------

def omega(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclass(frozen=True, eq=False)
class SymplecticMap:
    """Symplectic S on (data modes, ancilla modes) partitioned into blocks"""
    matrix: np.ndarray
    data_modes: int

    def __post_init__(self):
        s = np.asarray(self.matrix, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] % 2:
            raise TransformError(f"Symplectic matrix must be square with even size, got {s.shape}")
        if not 1 <= self.data_modes <= s.shape[0] // 2:
            raise TransformError(f"Data mode count {self.data_modes} outside the map")
        w = omega(s.shape[0] // 2)
        if np.max(np.abs(s @ w @ s.T - w)) > 1e-10:
            raise TransformError("Matrix does not preserve the symplectic form")
        if abs(abs(np.linalg.det(s)) - 1.0) > 1e-8:
            raise TransformError("Symplectic matrix must have unit determinant")
        object.__setattr__(self, 'matrix', s)

    @property
    def n_modes(self) -> int:
        return self.matrix.shape[0] // 2

    @property
    def ancilla_modes(self) -> int:
        return self.n_modes - self.data_modes

    def blocks(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        k = 2 * self.data_modes
        s = self.matrix
        return s[:k, :k], s[:k, k:], s[k:, :k], s[k:, k:]

    def inverse(self) -> 'SymplecticMap':
        w = omega(self.n_modes)
        return SymplecticMap(-w @ self.matrix.T @ w, self.data_modes)

    def __matmul__(self, other: 'SymplecticMap') -> 'SymplecticMap':
        return self.compose(other)

    def compose(self, other: 'SymplecticMap') -> 'SymplecticMap':
        """self after other"""
        if other.n_modes != self.n_modes:
            raise TransformError(f"Cannot compose maps on {self.n_modes} and {other.n_modes} modes")
        return SymplecticMap(self.matrix @ other.matrix, self.data_modes)

    def data_transform(self) -> np.ndarray:
        """T = S₁₁ - S₁₂ S₂₂⁻¹ S₂₁, the argument map of the transformed density"""
        s11, s12, s21, s22 = self.blocks()
        if self.ancilla_modes == 0:
            return s11
        if np.linalg.cond(s22) > 1e12:
            raise TransformError("S22 block is singular")
        return s11 - s12 @ np.linalg.solve(s22, s21)

    @classmethod
    def identity(cls, n_modes: int = 1, data_modes: int = 1) -> 'SymplecticMap':
        return cls(np.eye(2 * n_modes), data_modes)

    @classmethod
    def beamsplitter(cls, theta: float) -> 'SymplecticMap':
        c, s = math.cos(theta), math.sin(theta)
        return cls(np.block([[c * np.eye(2), -s * np.eye(2)], [s * np.eye(2), c * np.eye(2)]]), 1)

    @classmethod
    def two_mode_squeezer(cls, r: float) -> 'SymplecticMap':
        z = np.diag([1.0, -1.0])
        return cls(np.block([[math.cosh(r) * np.eye(2), math.sinh(r) * z],
                             [math.sinh(r) * z, math.cosh(r) * np.eye(2)]]), 1)

    @classmethod
    def squeezer(cls, r: float) -> 'SymplecticMap':
        return cls(np.diag([math.exp(-r), math.exp(r)]), 1)

    @classmethod
    def ellipse_to_circle(cls, a: float, b: float) -> 'SymplecticMap':
        """diag(√(a/b), √(b/a)): maps the ellipse (a cosφ, b sinφ) onto a circle of radius √(ab)"""
        if a <= 0 or b <= 0:
            raise TransformError("Ellipse semi-axes must be positive")
        return cls(np.diag([math.sqrt(a / b), math.sqrt(b / a)]), 1)

    @classmethod
    def phase_rotation(cls, phi: float) -> 'SymplecticMap':
        c, s = math.cos(phi), math.sin(phi)
        return cls(np.array([[c, -s], [s, c]]), 1)

    @classmethod
    def sum_gate(cls) -> 'SymplecticMap':
        """exp(-i q₁p₂): q₂ → q₂ + q₁, p₁ → p₁ - p₂"""
        return cls(np.array([
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, -1.0],
            [1.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ]), 2)

    @classmethod
    def embed(cls, local: 'SymplecticMap', modes: Sequence[int], n_modes: int,
              data_modes: Optional[int] = None) -> 'SymplecticMap':
        """Act with ``local`` on ``modes`` and trivially on the rest"""
        idx = np.array([[2 * m, 2 * m + 1] for m in modes]).ravel()
        s = np.eye(2 * n_modes)
        s[np.ix_(idx, idx)] = local.matrix
        return cls(s, data_modes if data_modes is not None else n_modes)

    @classmethod
    def pairwise(cls, block: 'SymplecticMap', data_modes: int) -> 'SymplecticMap':
        """
        Two-mode ``block`` applied to every pair (data mode i, ancilla mode i)
        of a network with ``data_modes`` sensors and as many ancillae.
        """
        if block.n_modes != 2 or block.data_modes != 1:
            raise TransformError("Pairwise extension needs a two-mode block with one data mode")
        n = 2 * data_modes
        s = np.eye(2 * n)
        for i in range(data_modes):
            idx = np.array([2 * i, 2 * i + 1, 2 * (data_modes + i), 2 * (data_modes + i) + 1])
            s[np.ix_(idx, idx)] = block.matrix
        return cls(s, data_modes)


@dataclass(frozen=True, eq=False)
class GaussianProbe:
    """Covariance matrix V′ of a Gaussian probe (vacuum = I/2)"""
    covariance: np.ndarray
    r: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.covariance, dtype=float)
        n = v.shape[0] // 2
        if v.shape != (2 * n, 2 * n) or n == 0:
            raise ContractError(f"Covariance must be 2M x 2M, got {v.shape}")
        if np.min(np.linalg.eigvalsh(v + 0.5j * omega(n))) < -1e-9:
            raise ContractError("Covariance violates the uncertainty principle")
        object.__setattr__(self, 'covariance', v)

    @classmethod
    def squeezed(cls, r: float) -> 'GaussianProbe':
        return cls(np.diag([math.exp(-2 * r) / 2, math.exp(2 * r) / 2]), r)

    @classmethod
    def vacuum(cls, n_modes: int = 1) -> 'GaussianProbe':
        return cls(np.eye(2 * n_modes) / 2)

    @classmethod
    def from_symplectic(cls, s: np.ndarray) -> 'GaussianProbe':
        """Pure Gaussian state S |vac⟩"""
        return cls(s @ s.T / 2)

    @property
    def energy(self) -> float:
        return 0.5 * (np.trace(self.covariance) - self.covariance.shape[0] // 2)


def transform_distribution(ensemble: LabeledDisplacementEnsemble, smap: SymplecticMap) -> LabeledDisplacementEnsemble:
    """Move every atom x to T⁻¹x so that P′(x) ∝ P(Tx); weights are preserved"""
    if ensemble.data_modes != smap.data_modes:
        raise TransformError(f"Ensemble has {ensemble.data_modes} modes, map expects {smap.data_modes}")
    t = smap.data_transform()
    if np.linalg.cond(t) > 1e12:
        raise TransformError("Data transform is singular")
    classes = tuple(ClassAtoms(np.linalg.solve(t, c.points.T).T, c.weights) for c in ensemble.classes)
    spec = TaskSpec(family=ATOMS, epsilon=ensemble.spec.epsilon, priors=tuple(ensemble.priors),
                    classes=tuple({'atoms': c.points.tolist(), 'weights': c.weights.tolist()} for c in classes))
    return LabeledDisplacementEnsemble(spec, classes, ensemble.priors)


def transform_energy(smap: SymplecticMap, v_prime) -> Tuple[float, float]:
    """
    (N_S, N′_S) with N_S = ½[Tr(S₁₁V′S₁₁ᵀ) + ½Tr(S₁₂S₁₂ᵀ) - M₁] and
    N′_S = ½[Tr V′ - M₁].
    """
    v = v_prime.covariance if isinstance(v_prime, GaussianProbe) else np.asarray(v_prime, dtype=float)
    m1 = smap.data_modes
    if v.shape != (2 * m1, 2 * m1):
        raise ContractError(f"V′ must be {2 * m1}x{2 * m1}, got {v.shape}")
    s11, s12, _, _ = smap.blocks()
    n_s = 0.5 * (np.trace(s11 @ v @ s11.T) + 0.5 * np.trace(s12 @ s12.T) - m1)
    n_s_prime = 0.5 * (np.trace(v) - m1)
    return float(n_s), float(n_s_prime)


@dataclass(frozen=True, eq=False)
class Reduction:
    """Result of mapping a 2-D real task to a 1-D complex one"""
    smap: SymplecticMap
    transformed: LabeledDisplacementEnsemble
    effective: LabeledDisplacementEnsemble

    def energy(self, v_prime) -> Tuple[float, float]:
        return transform_energy(self.smap, v_prime)

    def energy_shift(self, v_prime) -> float:
        """½⟨q₁² + p₂² + {q₁,q₂} - {p₁,p₂}⟩ for the zero-mean probe V′"""
        n_s, n_s_prime = self.energy(v_prime)
        return n_s - n_s_prime


def reduction_map() -> SymplecticMap:
    """Quarter-turn phase rotation on mode 2 composed with the SUM gate"""
    rotation = SymplecticMap.embed(SymplecticMap.phase_rotation(-math.pi / 2), (1,), 2)
    return rotation @ SymplecticMap.sum_gate()


def reduce_2d_real_to_1d_complex(ensemble: LabeledDisplacementEnsemble) -> Reduction:
    """
    Map atoms (x₁, 0, x₃, 0) to (x₁, x₃, -x₁, x₃). The second mode then
    follows the first, so the task is carried by the single complex
    amplitude x₁ + i x₃ of mode 1.
    """
    if ensemble.data_modes != 2:
        raise TransformError("The reduction needs a two-mode real ensemble")
    for atoms in ensemble.classes:
        if np.any(np.abs(atoms.points[:, [1, 3]]) > 1e-12):
            raise TransformError("Atoms must have the form (x1, 0, x3, 0)")
    smap = reduction_map()
    transformed = transform_distribution(ensemble, smap)
    classes = tuple(ClassAtoms(c.points[:, :2], c.weights) for c in transformed.classes)
    spec = TaskSpec(family=ATOMS, epsilon=ensemble.spec.epsilon, priors=tuple(ensemble.priors),
                    classes=tuple({'atoms': c.points.tolist(), 'weights': c.weights.tolist()} for c in classes))
    effective = LabeledDisplacementEnsemble(spec, classes, ensemble.priors)
    return Reduction(smap, transformed, effective)


def lemma1_check(c: float, n_s: float, modes: int = 1) -> float:
    """Energy after rescaling the data by c: c²N_S + M max(c² - 1, 0)"""
    if c <= 0:
        raise ContractError(f"Scale must be positive, got {c}")
    return c * c * n_s + modes * max(c * c - 1.0, 0.0)


# --- curve export ---------------------------------------------------------

BASELINES = ('gaussian-homodyne', 'helstrom-squeezed', 'photon-counting', 'number-interferometry', 'on-state')


def baseline_value(method: str, epsilon: float, energy: float, fock: int = 1,
                   cutoff: Optional[int] = None) -> float:
    """P_E of one closed-form or simulated baseline at a single ε"""
    methods: Dict[str, Callable[[float], float]] = {
        'gaussian-homodyne': lambda e: gaussian_binary_error(e, energy),
        'helstrom-squeezed': lambda e: helstrom_squeezed_binary(e, energy),
        'photon-counting': lambda e: squeezed_photon_counting_error(e, energy, cutoff),
        'number-interferometry': lambda e: number_interferometry_curve(fock, e),
        'on-state': lambda e: on_state_error(e, energy, cutoff).error,
    }
    if method not in methods:
        raise ContractError(f"Unknown baseline {method!r}")
    return float(methods[method](float(epsilon)))


def baseline_curve(method: str, grid: Sequence[float], energy: float, fock: int = 1,
                   cutoff: Optional[int] = None) -> pd.DataFrame:
    """(ε, P_E) series of one baseline"""
    grid = np.asarray(grid, dtype=float)
    values: List[float] = [baseline_value(method, e, energy, fock, cutoff) for e in grid]
    return pd.DataFrame({'epsilon (amplitude)': grid, 'P_E (probability)': values})
