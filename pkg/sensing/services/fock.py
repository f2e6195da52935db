"""
Truncated Fock-space linear algebra.

States and operators live on a ``SubsystemLayout``: an ordered list of
qumodes (cutoff ``d``) and qubits (dimension 2). Operators are usually
*local*: a small matrix acting on a few target subsystems, embedded into the
full layout only when a dense matrix is asked for. Matrix exponentials are
taken through the Hermitian eigendecomposition of ``i * generator``.

Quadrature convention: ``q = (a + a†)/√2``, ``p = (a - a†)/(√2 i)``. A
displacement by amplitude ``α`` shifts ``<q>`` by ``√2 Re α`` and ``<p>`` by
``√2 Im α``; displacement data vectors store ``(Re α, Im α)`` per mode.
"""
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..exceptions import ContractError, InvalidCutoffError, LeakageError, ShapeError
from .base import setting

logger = logging.getLogger(__name__)

QUMODE = 'qumode'
QUBIT = 'qubit'


@dataclass(frozen=True)
class SubsystemLayout:
    """Ordered tensor-product structure of qumodes and qubits"""
    entries: Tuple[Tuple[str, int], ...]

    def __post_init__(self):
        entries = tuple((str(kind), int(dim)) for kind, dim in self.entries)
        if not entries:
            raise ShapeError("Layout needs at least one subsystem")
        for kind, dim in entries:
            if kind == QUBIT and dim != 2:
                raise ShapeError(f"Qubit dimension must be 2, got {dim}")
            if kind == QUMODE and dim < 2:
                raise InvalidCutoffError(f"Fock cutoff must be at least 2, got {dim}")
            if kind not in (QUMODE, QUBIT):
                raise ShapeError(f"Unknown subsystem kind {kind!r}")
        object.__setattr__(self, 'entries', entries)

    @classmethod
    def build(cls, modes: int, cutoff: int, qubits: int = 0) -> 'SubsystemLayout':
        """Qumodes first, then qubits"""
        return cls(tuple([(QUMODE, cutoff)] * modes + [(QUBIT, 2)] * qubits))

    @classmethod
    def single_mode(cls, cutoff: int) -> 'SubsystemLayout':
        return cls.build(1, cutoff)

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(dim for _, dim in self.entries)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def qumodes(self) -> Tuple[int, ...]:
        return tuple(i for i, (kind, _) in enumerate(self.entries) if kind == QUMODE)

    @property
    def qubits(self) -> Tuple[int, ...]:
        return tuple(i for i, (kind, _) in enumerate(self.entries) if kind == QUBIT)

    def kind(self, index: int) -> str:
        return self.entries[index][0]

    def sublayout(self, indices: Sequence[int]) -> 'SubsystemLayout':
        return SubsystemLayout(tuple(self.entries[i] for i in indices))

    def with_cutoff(self, cutoff: int) -> 'SubsystemLayout':
        return SubsystemLayout(tuple(
            (kind, cutoff if kind == QUMODE else dim) for kind, dim in self.entries
        ))

    def check_targets(self, targets: Sequence[int], kind: Optional[str] = None):
        if len(set(targets)) != len(targets):
            raise ShapeError(f"Repeated target subsystems {tuple(targets)}")
        for t in targets:
            if not 0 <= t < len(self.entries):
                raise ShapeError(f"Subsystem {t} not in layout of size {len(self.entries)}")
            if kind is not None and self.kind(t) != kind:
                raise ShapeError(f"Subsystem {t} is a {self.kind(t)}, expected {kind}")


def apply_local(matrix: np.ndarray, targets: Sequence[int], dims: Sequence[int],
                vectors: np.ndarray) -> np.ndarray:
    """
    Apply a matrix acting on ``targets`` to a batch of column vectors.

    Args:
        matrix: square matrix over the product of the target dimensions
        targets: subsystem indices, in the tensor order of ``matrix``
        dims: dimensions of every subsystem of the layout
        vectors: array of shape (prod(dims), k)

    Returns:
        Array of the same shape as ``vectors``.
    """
    k = vectors.shape[1]
    n = len(targets)
    tdims = [dims[t] for t in targets]
    tensor = vectors.reshape(*dims, k)
    op = matrix.reshape(*tdims, *tdims)
    out = np.tensordot(op, tensor, axes=(list(range(n, 2 * n)), list(targets)))
    out = np.moveaxis(out, list(range(n)), list(targets))
    return out.reshape(-1, k)


def _non_leaking_indices(dims: Sequence[int], kinds: Sequence[str]) -> np.ndarray:
    """Basis indices whose qumode levels all sit below the top two"""
    grids = np.indices(dims).reshape(len(dims), -1)
    mask = np.ones(grids.shape[1], dtype=bool)
    for axis, (kind, dim) in enumerate(zip(kinds, dims)):
        if kind == QUMODE:
            mask &= grids[axis] < dim - 2
    return np.flatnonzero(mask)


@dataclass(frozen=True, eq=False)
class Operator:
    """
    Complex matrix on a layout.

    ``targets`` is None for a matrix over the whole layout, otherwise the
    subsystems the (smaller) matrix acts on; identity elsewhere.
    """
    layout: SubsystemLayout
    data: np.ndarray
    targets: Optional[Tuple[int, ...]] = None
    unitary: bool = False
    hermitian: bool = False

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if self.targets is not None:
            targets = tuple(int(t) for t in self.targets)
            self.layout.check_targets(targets)
            object.__setattr__(self, 'targets', targets)
        expected = int(np.prod(self.local_dims))
        if data.shape != (expected, expected):
            raise ShapeError(f"Operator shape {data.shape} does not match layout dimension {expected}")
        object.__setattr__(self, 'data', data)

    @property
    def target_indices(self) -> Tuple[int, ...]:
        return self.targets if self.targets is not None else tuple(range(len(self.layout.entries)))

    @property
    def local_dims(self) -> Tuple[int, ...]:
        return tuple(self.layout.dims[t] for t in self.target_indices)

    @property
    def local_kinds(self) -> Tuple[str, ...]:
        return tuple(self.layout.kind(t) for t in self.target_indices)

    def apply_vectors(self, vectors: np.ndarray) -> np.ndarray:
        if self.targets is None:
            return self.data @ vectors
        return apply_local(self.data, self.targets, self.layout.dims, vectors)

    def apply(self, state: 'QuantumState') -> 'QuantumState':
        if state.layout != self.layout:
            raise ShapeError("Operator and state layouts differ")
        if state.is_pure:
            return QuantumState(self.layout, self.apply_vectors(state.data[:, None])[:, 0])
        left = self.apply_vectors(state.data)
        rho = self.apply_vectors(left.conj().T).conj().T
        return QuantumState(self.layout, rho)

    def matrix(self) -> np.ndarray:
        """Dense matrix over the full layout"""
        if self.targets is None:
            return self.data
        return self.apply_vectors(np.eye(self.layout.total_dim, dtype=complex))

    def lift(self, layout: SubsystemLayout, targets: Sequence[int]) -> 'Operator':
        """Place this operator's local matrix on ``targets`` of a larger layout"""
        if tuple(layout.dims[t] for t in targets) != self.local_dims:
            raise ShapeError("Target dimensions do not match the operator")
        return Operator(layout, self.data, tuple(targets), self.unitary, self.hermitian)

    def dagger(self) -> 'Operator':
        return Operator(self.layout, self.data.conj().T, self.targets, self.unitary, self.hermitian)

    def __matmul__(self, other: 'Operator') -> 'Operator':
        if other.layout != self.layout:
            raise ShapeError("Cannot compose operators on different layouts")
        if self.targets is None or other.targets is None:
            return Operator(self.layout, self.matrix() @ other.matrix(),
                            unitary=self.unitary and other.unitary)
        union = tuple(sorted(set(self.targets) | set(other.targets)))
        return Operator(self.layout, self._expand(union) @ other._expand(union), union,
                        unitary=self.unitary and other.unitary)

    def _expand(self, union: Tuple[int, ...]) -> np.ndarray:
        dims = [self.layout.dims[t] for t in union]
        positions = [union.index(t) for t in self.targets]
        return apply_local(self.data, positions, dims, np.eye(int(np.prod(dims)), dtype=complex))

    def unitarity_defect(self) -> float:
        """max |U†U - I| over the basis states below the top two Fock levels"""
        keep = _non_leaking_indices(self.local_dims, self.local_kinds)
        gram = self.data.conj().T @ self.data - np.eye(self.data.shape[0])
        return float(np.max(np.abs(gram[np.ix_(keep, keep)]))) if keep.size else 0.0

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.data - self.data.conj().T)))

    def verify(self) -> 'Operator':
        """Check the unitary/Hermitian tags against the data"""
        if self.unitary:
            defect = self.unitarity_defect()
            if defect >= setting('UNITARITY_TOLERANCE', 1e-8):
                raise ContractError(f"Operator tagged unitary has |U†U - I| = {defect:.3e}")
        if self.hermitian:
            defect = self.hermiticity_defect()
            if defect >= setting('HERMITICITY_TOLERANCE', 1e-12):
                raise ContractError(f"Operator tagged Hermitian has |H - H†| = {defect:.3e}")
        return self


@dataclass(frozen=True, eq=False)
class QuantumState:
    """Pure (vector) or mixed (density matrix) state on a layout"""
    layout: SubsystemLayout
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        n = self.layout.total_dim
        if data.shape not in ((n,), (n, n)):
            raise ShapeError(f"State shape {data.shape} does not match layout dimension {n}")
        object.__setattr__(self, 'data', data)

    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    @classmethod
    def basis(cls, layout: SubsystemLayout, levels: Sequence[int]) -> 'QuantumState':
        """Product of computational/Fock basis states"""
        if len(levels) != len(layout.entries):
            raise ShapeError("One level per subsystem is required")
        vec = np.zeros(layout.total_dim, dtype=complex)
        vec[np.ravel_multi_index(tuple(levels), layout.dims)] = 1.0
        return cls(layout, vec)

    @classmethod
    def vacuum(cls, layout: SubsystemLayout) -> 'QuantumState':
        """All qumodes in vacuum, all qubits in |0>"""
        return cls.basis(layout, [0] * len(layout.entries))

    def density(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.data, self.data.conj())
        return self.data

    def to_mixed(self) -> 'QuantumState':
        return QuantumState(self.layout, self.density())

    def probabilities(self) -> np.ndarray:
        """Computational-basis populations, reshaped to the layout"""
        if self.is_pure:
            probs = np.abs(self.data) ** 2
        else:
            probs = np.real(np.diag(self.data))
        return probs.reshape(self.layout.dims)

    def norm(self) -> float:
        if self.is_pure:
            return float(np.linalg.norm(self.data))
        return float(np.real(np.trace(self.data)))

    def purity(self) -> float:
        if self.is_pure:
            return self.norm() ** 4
        return float(np.real(np.trace(self.data @ self.data)))

    def validate(self, tol: Optional[float] = None) -> 'QuantumState':
        tol = setting('NORM_TOLERANCE', 1e-10) if tol is None else tol
        if self.is_pure:
            if abs(self.norm() - 1.0) > tol:
                raise ContractError(f"State norm {self.norm():.12f} differs from 1")
            return self
        rho = self.data
        if abs(np.trace(rho) - 1.0) > tol:
            raise ContractError(f"Density matrix trace {np.trace(rho).real:.12f} differs from 1")
        if np.max(np.abs(rho - rho.conj().T)) > tol:
            raise ContractError("Density matrix is not Hermitian")
        if np.min(np.linalg.eigvalsh(rho)) < -tol:
            raise ContractError("Density matrix has negative eigenvalues")
        return self

    def leakage(self) -> float:
        """Largest population in the top two Fock levels over all qumodes"""
        probs = self.probabilities()
        worst = 0.0
        for mode in self.layout.qumodes:
            others = tuple(a for a in range(probs.ndim) if a != mode)
            marginal = probs.sum(axis=others)
            worst = max(worst, float(marginal[-2:].sum()))
        return worst

    def check_leakage(self, tol: Optional[float] = None) -> 'QuantumState':
        tol = setting('LEAKAGE_TOLERANCE', 1e-8) if tol is None else tol
        leak = self.leakage()
        if leak >= tol:
            cutoff = self.layout.dims[self.layout.qumodes[0]] if self.layout.qumodes else None
            raise LeakageError(f"Top-level Fock population {leak:.3e} at cutoff {cutoff}", leak, cutoff)
        return self


# --- single-mode matrices -------------------------------------------------

def _check_cutoff(d: int):
    if int(d) < 2:
        raise InvalidCutoffError(f"Fock cutoff must be at least 2, got {d}")


@lru_cache(maxsize=None)
def _lowering(d: int) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1).astype(complex)
    a.setflags(write=False)
    return a


def _single(matrix: np.ndarray, d: int, unitary: bool = False, hermitian: bool = False) -> Operator:
    return Operator(SubsystemLayout.single_mode(d), matrix, unitary=unitary, hermitian=hermitian)


def annihilation(d: int) -> Operator:
    _check_cutoff(d)
    return _single(_lowering(d), d)


def creation(d: int) -> Operator:
    _check_cutoff(d)
    return _single(_lowering(d).conj().T, d)


def number(d: int) -> Operator:
    _check_cutoff(d)
    return _single(np.diag(np.arange(d, dtype=float)), d, hermitian=True)


def quadratures(d: int) -> Tuple[Operator, Operator]:
    """(q, p) with q = (a + a†)/√2 and p = (a - a†)/(√2 i)"""
    _check_cutoff(d)
    a = _lowering(d)
    q = (a + a.conj().T) / np.sqrt(2)
    p = (a - a.conj().T) / (np.sqrt(2) * 1j)
    return _single(q, d, hermitian=True), _single(p, d, hermitian=True)


def parity(d: int) -> Operator:
    _check_cutoff(d)
    return _single(np.diag((-1.0) ** np.arange(d)), d, unitary=True, hermitian=True)


def identity(layout: SubsystemLayout) -> Operator:
    return Operator(layout, np.eye(layout.total_dim), unitary=True, hermitian=True)


def unitary_from_hermitian(hamiltonian: np.ndarray) -> np.ndarray:
    """exp(-i H) for Hermitian H via eigendecomposition"""
    evals, evecs = np.linalg.eigh(hamiltonian)
    return (evecs * np.exp(-1j * evals)) @ evecs.conj().T


@lru_cache(maxsize=None)
def _displacement_eigensystem(d: int) -> Tuple[np.ndarray, np.ndarray]:
    a = _lowering(d)
    evals, evecs = np.linalg.eigh(1j * (a.conj().T - a))
    evals.setflags(write=False)
    evecs.setflags(write=False)
    return evals, evecs


def displacement_matrix(alpha: complex, d: int) -> np.ndarray:
    """exp(α a† - α* a) on the truncated space"""
    alpha = complex(alpha)
    if alpha == 0:
        return np.eye(d, dtype=complex)
    evals, evecs = _displacement_eigensystem(d)
    radial = (evecs * np.exp(-1j * abs(alpha) * evals)) @ evecs.conj().T
    phase = np.exp(1j * np.angle(alpha) * np.arange(d))
    return phase[:, None] * radial * phase.conj()[None, :]


def displacement(alpha: complex, d: int) -> Operator:
    _check_cutoff(d)
    if abs(alpha) ** 2 > d / 4:
        logger.warning(f"Displacement |alpha|^2={abs(alpha) ** 2:.3f} is large for cutoff {d}")
    return _single(displacement_matrix(alpha, d), d, unitary=True).verify()


def amplitudes(x: Sequence[float]) -> np.ndarray:
    """Complex amplitudes from a data vector (Re α₁, Im α₁, Re α₂, ...)"""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size % 2:
        raise ShapeError(f"Displacement vector must have even length, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ContractError("Displacement vector is not finite")
    return x[0::2] + 1j * x[1::2]


def displace_vectors(vectors: np.ndarray, x: Sequence[float], layout: SubsystemLayout,
                     modes: Optional[Sequence[int]] = None) -> np.ndarray:
    """Apply D(x) mode by mode to a batch of column vectors"""
    modes = layout.qumodes if modes is None else tuple(modes)
    alphas = amplitudes(x)
    if alphas.size != len(modes):
        raise ShapeError(f"Displacement of length {2 * alphas.size} for {len(modes)} modes")
    out = vectors
    for mode, alpha in zip(modes, alphas):
        if alpha != 0:
            out = apply_local(displacement_matrix(alpha, layout.dims[mode]), (mode,), layout.dims, out)
    return out


def multimode_displacement(x: Sequence[float], layout: SubsystemLayout,
                           modes: Optional[Sequence[int]] = None) -> Operator:
    """⊗ D(α_m) on the given qumodes (all qumodes by default), identity elsewhere"""
    modes = layout.qumodes if modes is None else tuple(modes)
    layout.check_targets(modes, QUMODE)
    alphas = amplitudes(x)
    if alphas.size != len(modes):
        raise ShapeError(f"Displacement of length {2 * alphas.size} for {len(modes)} modes")
    matrix = np.ones((1, 1), dtype=complex)
    for mode, alpha in zip(modes, alphas):
        matrix = np.kron(matrix, displacement_matrix(alpha, layout.dims[mode]))
    return Operator(layout, matrix, modes, unitary=True)


GAUSSIAN_KINDS = ('squeezer', 'beamsplitter', 'two_mode_squeezer', 'sum_gate')


def gaussian_ops(kind: str, layout: SubsystemLayout, targets: Sequence[int],
                 param: float = 0.0) -> Operator:
    """
    Gaussian unitaries as exponentials of quadratic generators.

    squeezer(r):          exp(r/2 (a² - a†²)),            q -> e^{-r} q
    beamsplitter(θ):      exp(θ (a₁ a₂† - a₁† a₂)),       q₁ -> cosθ q₁ - sinθ q₂
    two_mode_squeezer(r): exp(r (a₁† a₂† - a₁ a₂)),       q₁ -> cosh r q₁ + sinh r q₂
    sum_gate:             exp(-i q₁ p₂),                  q₂ -> q₂ + q₁, p₁ -> p₁ - p₂
    """
    targets = tuple(targets)
    if kind not in GAUSSIAN_KINDS:
        raise ContractError(f"Unknown Gaussian operation {kind!r}")
    expected = 1 if kind == 'squeezer' else 2
    if len(targets) != expected:
        raise ShapeError(f"{kind} acts on {expected} mode(s), got targets {targets}")
    layout.check_targets(targets, QUMODE)
    dims = [layout.dims[t] for t in targets]
    if kind == 'squeezer':
        a = _lowering(dims[0])
        generator = 0.5 * param * (a @ a - a.conj().T @ a.conj().T)
        matrix = unitary_from_hermitian(1j * generator)
    elif kind == 'sum_gate':
        q, _ = quadratures(dims[0])
        _, p = quadratures(dims[1])
        lam_q, vec_q = np.linalg.eigh(q.data)
        lam_p, vec_p = np.linalg.eigh(p.data)
        vec = np.kron(vec_q, vec_p)
        matrix = (vec * np.exp(-1j * np.kron(lam_q, lam_p))) @ vec.conj().T
    else:
        a1 = np.kron(_lowering(dims[0]), np.eye(dims[1]))
        a2 = np.kron(np.eye(dims[0]), _lowering(dims[1]))
        if kind == 'beamsplitter':
            generator = param * (a1 @ a2.conj().T - a1.conj().T @ a2)
        else:
            generator = param * (a1.conj().T @ a2.conj().T - a1 @ a2)
        matrix = unitary_from_hermitian(1j * generator)
    return Operator(layout, matrix, targets, unitary=True).verify()


# --- states ---------------------------------------------------------------

def fock_state(n: int, d: int) -> QuantumState:
    return QuantumState.basis(SubsystemLayout.single_mode(d), [n])


def coherent_state(alpha: complex, d: int) -> QuantumState:
    return QuantumState(SubsystemLayout.single_mode(d), displacement_matrix(alpha, d)[:, 0])


def squeezed_vacuum(r: float, d: int) -> QuantumState:
    layout = SubsystemLayout.single_mode(d)
    return gaussian_ops('squeezer', layout, (0,), r).apply(QuantumState.vacuum(layout))


def product_state(*factors: QuantumState) -> QuantumState:
    """Tensor product of pure factors, layouts concatenated in order"""
    entries: List[Tuple[str, int]] = []
    vec = np.ones(1, dtype=complex)
    for factor in factors:
        if not factor.is_pure:
            raise ContractError("product_state expects pure factors")
        entries.extend(factor.layout.entries)
        vec = np.kron(vec, factor.data)
    return QuantumState(SubsystemLayout(tuple(entries)), vec)


# --- measurements and reductions -----------------------------------------

def expectation(state: QuantumState, op: Operator) -> float:
    if op.layout != state.layout:
        raise ShapeError("Operator and state layouts differ")
    if not op.hermitian and op.hermiticity_defect() >= setting('HERMITICITY_TOLERANCE', 1e-12):
        raise ContractError("Expectation requires a Hermitian operator")
    if state.is_pure:
        value = np.vdot(state.data, op.apply_vectors(state.data[:, None])[:, 0])
    else:
        value = np.trace(op.apply_vectors(state.data))
    if abs(value.imag) > 1e-10 * max(1.0, abs(value.real)):
        logger.warning(f"Expectation has imaginary residue {value.imag:.3e}")
    return float(value.real)


def covariance(state: QuantumState, ops: Sequence[Operator]) -> np.ndarray:
    """Symmetrised covariance <{g_i, g_j}>/2 - <g_i><g_j> of Hermitian operators"""
    for op in ops:
        if op.layout != state.layout:
            raise ShapeError("Operator and state layouts differ")
    rho = state.density()
    images = [op.apply_vectors(rho) for op in ops]
    means = np.array([np.real(np.trace(img)) for img in images])
    n = len(ops)
    cov = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            # Tr(g_i g_j rho), symmetrised by taking the real part
            cov[i, j] = np.real(np.trace(ops[i].apply_vectors(images[j]))) - means[i] * means[j]
    return cov


def quadrature_covariance(state: QuantumState, mode: int) -> np.ndarray:
    d = state.layout.dims[mode]
    q, p = quadratures(d)
    return covariance(state, [q.lift(state.layout, (mode,)), p.lift(state.layout, (mode,))])


def mean_occupation(state: QuantumState, modes: Optional[Sequence[int]] = None) -> float:
    modes = state.layout.qumodes if modes is None else modes
    total = 0.0
    for mode in modes:
        dist = photon_distribution(state, mode)
        total += float(np.dot(np.arange(dist.size), dist))
    return total


def partial_trace(state: QuantumState, keep: Sequence[int]) -> QuantumState:
    keep = tuple(keep)
    if not keep:
        raise ContractError("partial_trace needs at least one subsystem to keep")
    state.layout.check_targets(keep)
    dims = state.layout.dims
    traced = tuple(i for i in range(len(dims)) if i not in keep)
    dk = int(np.prod([dims[i] for i in keep]))
    dt = int(np.prod([dims[i] for i in traced])) if traced else 1
    if state.is_pure:
        psi = np.transpose(state.data.reshape(dims), keep + traced).reshape(dk, dt)
        rho = psi @ psi.conj().T
    else:
        n = len(dims)
        tensor = state.data.reshape(dims + dims)
        order = keep + traced + tuple(n + i for i in keep) + tuple(n + i for i in traced)
        rho = np.einsum('ajbj->ab', np.transpose(tensor, order).reshape(dk, dt, dk, dt))
    return QuantumState(state.layout.sublayout(keep), rho)


def photon_distribution(state: QuantumState, mode: int) -> np.ndarray:
    state.layout.check_targets((mode,), QUMODE)
    probs = state.probabilities()
    others = tuple(a for a in range(probs.ndim) if a != mode)
    return np.clip(probs.sum(axis=others) if others else probs, 0.0, None)


def fidelity_with_fock(state: QuantumState, mode: int, n: int) -> float:
    return float(photon_distribution(state, mode)[n])


# --- Wigner function ------------------------------------------------------

@dataclass
class WignerGrid:
    """W(q, p) sampled on a rectangular grid; values[i, j] is at (q[i], p[j])"""
    q: np.ndarray
    p: np.ndarray
    values: np.ndarray
    warnings: List[str] = field(default_factory=list)

    @property
    def cell(self) -> float:
        return float((self.q[1] - self.q[0]) * (self.p[1] - self.p[0]))

    def total(self) -> float:
        return float(self.values.sum() * self.cell)

    def marginal_q(self) -> np.ndarray:
        return self.values.sum(axis=1) * float(self.p[1] - self.p[0])

    def marginal_p(self) -> np.ndarray:
        return self.values.sum(axis=0) * float(self.q[1] - self.q[0])

    def to_frame(self) -> pd.DataFrame:
        qq, pp = np.meshgrid(self.q, self.p, indexing='ij')
        return pd.DataFrame({
            'q (quadrature)': qq.ravel(),
            'p (quadrature)': pp.ravel(),
            'W (1/area)': self.values.ravel(),
        })

    def to_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format='%.12g')


def wigner(state: QuantumState, q_range: Tuple[float, float] = (-5.0, 5.0),
           p_range: Tuple[float, float] = (-5.0, 5.0), resolution: int = 101,
           mode: Optional[int] = None) -> WignerGrid:
    """
    Wigner function via displaced parity, W(q,p) = (1/π) <D(α) Π D†(α)> with
    α = (q + ip)/√2, so that the vacuum peaks at 1/π and ∫W dq dp = 1.
    """
    if state.layout.qumodes == (0,) and len(state.layout.entries) == 1:
        reduced = state
    else:
        if mode is None:
            raise ContractError("wigner needs a single-qumode state or an explicit mode")
        reduced = partial_trace(state, (mode,))
    d = reduced.layout.dims[0]
    rho = reduced.density()
    signs = (-1.0) ** np.arange(d)
    q = np.linspace(q_range[0], q_range[1], resolution)
    p = np.linspace(p_range[0], p_range[1], resolution)
    values = np.empty((q.size, p.size))
    for i, qi in enumerate(q):
        for j, pj in enumerate(p):
            disp = displacement_matrix((qi + 1j * pj) / np.sqrt(2), d)
            shifted = disp.conj().T @ rho @ disp
            values[i, j] = np.real(np.dot(signs, np.diag(shifted))) / np.pi
    warnings = []
    reach = max(abs(q_range[0]), abs(q_range[1])) ** 2 / 2 + max(abs(p_range[0]), abs(p_range[1])) ** 2 / 2
    if reach > d / 4:
        warnings.append(f"Grid reaches |alpha|^2={reach:.2f} beyond the trustworthy region d/4={d / 4:.2f}")
        logger.warning(warnings[-1])
    return WignerGrid(q, p, values, warnings)
