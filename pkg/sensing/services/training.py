"""
Variational training of (θ_p, θ_m).

The loss is P_E + λ(⟨n̂⟩ - N_S)² with ⟨n̂⟩ the data-mode occupation of the
probe. Gradients are central finite differences; Adam drives the updates
under a stepped penalty schedule, restarted from independent seeds.
"""
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..exceptions import ConfigError, ContractError, LeakageError, NumericError, OptimizationFailure
from .base import BaseService, setting
from .circuit import AnsatzParams, Architecture, SystemParams, apply_ansatz, probe_energy
from .fock import QuantumState
from .tasks import (
    CIRCLE,
    RF_CIRCLE,
    LabeledDisplacementEnsemble,
    NoiseModel,
    TaskSpec,
    check_columns,
    correct_probability,
    displaced_columns,
    ensemble_points,
    error_probability,
    make_task,
    noisy_columns,
    noisy_error_probability,
)

logger = logging.getLogger(__name__)

TRAINABLE = ('all', 'probe', 'measurement')


@dataclass(frozen=True)
class OptimizerSettings:
    learning_rate: float = 0.01
    max_iterations: int = 5000
    tolerance: float = 1e-12
    patience: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


@dataclass(frozen=True)
class PenaltySchedule:
    """λ = start · factor^stage, capped at maximum; a stage lasts ``every`` iterations"""
    start: float = 10.0
    factor: float = 10.0
    every: int = 1000
    maximum: float = 1e3
    extra_stages: int = 2

    def value(self, stage: int) -> float:
        return min(self.start * self.factor ** stage, self.maximum)

    @property
    def stages(self) -> int:
        return int(round(math.log(self.maximum / self.start, self.factor))) + 1 if self.maximum > self.start else 1


@dataclass(frozen=True, eq=False)
class TrainConfig:
    architecture: Architecture
    task: TaskSpec
    energy: float
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    penalty: PenaltySchedule = field(default_factory=PenaltySchedule)
    restarts: int = 8
    seed: int = 0
    trainable: str = 'all'
    noise: Optional[NoiseModel] = None
    fd_step: Optional[float] = None
    workers: int = 1
    initial: Optional[SystemParams] = None
    validation_atoms: Optional[int] = None

    def __post_init__(self):
        opt = self.optimizer
        if opt.learning_rate <= 0 or opt.tolerance <= 0 or opt.max_iterations < 1 or opt.patience < 1:
            raise ConfigError("Optimizer rates, tolerances and iteration counts must be positive", 'optimizer')
        if self.restarts < 1:
            raise ConfigError("At least one restart is required", 'restarts')
        if self.energy < 0:
            raise ConfigError(f"Energy budget must be non-negative, got {self.energy}", 'energy')
        if self.trainable not in TRAINABLE:
            raise ConfigError(f"trainable must be one of {TRAINABLE}", 'trainable')
        if self.penalty.start < 0 or self.penalty.factor < 1 or self.penalty.every < 1:
            raise ConfigError("Invalid penalty schedule", 'penalty')
        if self.trainable == 'measurement' and self.initial is None:
            raise ConfigError("Measurement-only training needs a fixed probe", 'initial')

    @property
    def step(self) -> float:
        return self.fd_step or setting('FD_STEP', 1e-5)

    def with_task(self, **changes) -> 'TrainConfig':
        return replace(self, task=self.task.replace(**changes))


@dataclass
class Evaluation:
    loss: float
    error: float
    energy: float


class LossContext:
    """
    Loss evaluator over the free parameters selected by ``trainable``.

    Keeps a size-one cache of the probe state and its displaced copies, so
    perturbing measurement parameters never rebuilds the probe.
    """

    def __init__(self, arch: Architecture, ensemble: LabeledDisplacementEnsemble, energy: float,
                 trainable: str = 'all', fixed: Optional[SystemParams] = None,
                 noise: Optional[NoiseModel] = None):
        self.arch = arch
        self.ensemble = ensemble
        self.energy = energy
        self.trainable = trainable
        self.fixed = fixed or SystemParams.zeros(arch)
        self.noise = None if noise is None or noise.is_zero else noise
        self._points = ensemble_points(ensemble)
        self._node_weights = None
        self._zetas = None
        if self.noise is not None:
            self._zetas, self._node_weights = self.noise.quadrature()
        self._cache_key: Optional[bytes] = None
        self._cache: Optional[Tuple[np.ndarray, float, np.ndarray]] = None

    @property
    def size(self) -> int:
        n = self.arch.n_params
        return 2 * n if self.trainable == 'all' else n

    def split(self, free: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        n = self.arch.n_params
        if self.trainable == 'all':
            return free[:n], free[n:]
        if self.trainable == 'probe':
            return free, self.fixed.measurement.pack()
        return self.fixed.probe.pack(), free

    def params(self, free: np.ndarray) -> SystemParams:
        probe, measurement = self.split(np.asarray(free, dtype=float))
        return SystemParams(AnsatzParams.unpack(probe, self.arch), AnsatzParams.unpack(measurement, self.arch))

    def free_vector(self, params: SystemParams) -> np.ndarray:
        if self.trainable == 'all':
            return params.vector()
        if self.trainable == 'probe':
            return params.probe.pack()
        return params.measurement.pack()

    def with_cutoff(self, cutoff: int) -> 'LossContext':
        return LossContext(self.arch.with_cutoff(cutoff), self.ensemble, self.energy, self.trainable,
                           self.fixed, self.noise)

    def _probe_data(self, probe_vec: np.ndarray) -> Tuple[np.ndarray, float, np.ndarray]:
        key = probe_vec.tobytes()
        if key != self._cache_key:
            arch = self.arch
            start = QuantumState.vacuum(arch.layout).data[:, None]
            probe = check_columns(apply_ansatz(AnsatzParams.unpack(probe_vec, arch), arch, start), arch)[:, 0]
            energy = probe_energy(QuantumState(arch.layout, probe), arch)
            columns = displaced_columns(probe, self._points, arch)
            if self.noise is not None:
                columns = noisy_columns(columns, self.noise, self._zetas, arch)
            self._cache_key = key
            self._cache = (probe, energy, columns)
        return self._cache

    def evaluate(self, free: np.ndarray, lam: float) -> Evaluation:
        probe_vec, meas_vec = self.split(np.asarray(free, dtype=float))
        _, energy, columns = self._probe_data(probe_vec)
        outputs = check_columns(apply_ansatz(AnsatzParams.unpack(meas_vec, self.arch), self.arch, columns),
                                self.arch)
        error = 1.0 - correct_probability(outputs, self.ensemble, self.arch, self._node_weights)
        value = error + lam * (energy - self.energy) ** 2
        if not np.isfinite(value):
            raise NumericError(f"Loss evaluated to {value}")
        return Evaluation(float(value), float(error), float(energy))


def loss(params: SystemParams, ensemble: LabeledDisplacementEnsemble, arch: Architecture, energy: float,
         lam: float, noise: Optional[NoiseModel] = None) -> float:
    """error probability + λ(⟨n̂⟩ - N_S)²"""
    if lam < 0:
        raise ContractError(f"Penalty weight must be non-negative, got {lam}")
    context = LossContext(arch, ensemble, energy, noise=noise)
    return context.evaluate(context.free_vector(params), lam).loss


def gradient(free: np.ndarray, context: LossContext, lam: float, h: Optional[float] = None) -> np.ndarray:
    """Central finite differences; β enters as its real and imaginary parts"""
    h = h or setting('FD_STEP', 1e-5)
    free = np.asarray(free, dtype=float)
    if not np.all(np.isfinite(free)):
        raise NumericError("Parameters are not finite")
    grad = np.empty_like(free)
    shifted = free.copy()
    for i in range(free.size):
        shifted[i] = free[i] + h
        up = context.evaluate(shifted, lam).loss
        shifted[i] = free[i] - h
        down = context.evaluate(shifted, lam).loss
        shifted[i] = free[i]
        grad[i] = (up - down) / (2 * h)
    if not np.all(np.isfinite(grad)):
        raise NumericError("Gradient is not finite")
    return grad


def richardson_gradient(free: np.ndarray, context: LossContext, lam: float,
                        h: Optional[float] = None) -> np.ndarray:
    """(4 D(h/2) - D(h)) / 3, cancelling the h² term of the central difference"""
    h = h or setting('FD_STEP', 1e-5)
    return (4.0 * gradient(free, context, lam, h / 2) - gradient(free, context, lam, h)) / 3.0


class Adam:
    """Adaptive moment estimation on a flat parameter vector"""

    def __init__(self, lr: float = 0.01, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.m: Optional[np.ndarray] = None
        self.v: Optional[np.ndarray] = None
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * (grad * grad)
        return params - (self.lr / bc1) * self.m / (np.sqrt(self.v / bc2) + self.epsilon)


@dataclass
class RestartOutcome:
    index: int
    vector: np.ndarray
    error: float
    energy: float
    residual: float
    trace: List[float]
    feasible: bool
    cutoff: int
    iterations: int
    message: str = ''


def _escalate(context: LossContext, exc: LeakageError) -> LossContext:
    cutoff = context.arch.cutoff + setting('FOCK_CUTOFF_STEP', 10)
    limit = setting('FOCK_CUTOFF_MAX', 60)
    if cutoff > limit:
        raise exc
    logger.warning(f"Leakage {exc.leakage:.2e} at cutoff {context.arch.cutoff}, escalating to {cutoff}")
    return context.with_cutoff(cutoff)


def _starting_point(config: TrainConfig, rng: np.random.Generator, warm: bool) -> Tuple[SystemParams, SystemParams]:
    """(start, fixed): the fixed half comes from ``initial`` when one is given"""
    drawn = SystemParams.random(config.architecture, rng)
    base = config.initial or drawn
    if warm:
        return base, base
    if config.trainable == 'probe':
        return SystemParams(drawn.probe, base.measurement), base
    if config.trainable == 'measurement':
        return SystemParams(base.probe, drawn.measurement), base
    return drawn, base


def run_restart(config: TrainConfig, index: int, seed: np.random.SeedSequence,
                ensemble: Optional[LabeledDisplacementEnsemble] = None, warm: bool = False) -> RestartOutcome:
    """One Adam run under the penalty schedule; module level so it pickles into workers"""
    ensemble = ensemble or make_task(config.task)
    start, fixed = _starting_point(config, np.random.default_rng(seed), warm)
    context = LossContext(config.architecture, ensemble, config.energy, config.trainable, fixed, config.noise)
    free = context.free_vector(start)

    opt = config.optimizer
    schedule = config.penalty
    penalised = config.trainable != 'measurement'
    lam_max = schedule.maximum if penalised else 0.0
    adam = Adam(opt.learning_rate, opt.beta1, opt.beta2, opt.epsilon)
    tol_energy = setting('ENERGY_FEASIBILITY_TOLERANCE', 1e-3)

    best_merit, best_free = math.inf, free.copy()
    trace: List[float] = []
    stage, stage_start, extra, iteration = 0, 0, 0, 0
    logger.info(f"Restart {index}: {context.size} parameters, cutoff {context.arch.cutoff}")

    while True:
        lam = schedule.value(stage) * schedule.factor ** extra if penalised else 0.0
        try:
            ev = context.evaluate(free, lam)
            grad = gradient(free, context, lam, config.step)
        except LeakageError as exc:
            context = _escalate(context, exc)
            continue
        # merit at the final penalty weight keeps the best-so-far trace monotone across stages
        merit = ev.error + lam_max * (ev.energy - config.energy) ** 2
        if merit < best_merit:
            best_merit, best_free = merit, free.copy()
        trace.append(best_merit)
        iteration += 1

        in_stage = iteration - stage_start
        stalled = in_stage > opt.patience and trace[-opt.patience - 1] - trace[-1] < opt.tolerance
        last = not penalised or stage + 1 >= schedule.stages
        if not last and (stalled or in_stage >= schedule.every):
            stage, stage_start = stage + 1, iteration
            logger.debug(f"Restart {index}: penalty stage {stage} (lambda={schedule.value(stage):g})")
        elif last:
            limit = opt.max_iterations if extra == 0 else schedule.every
            if stalled or (iteration if extra == 0 else in_stage) >= limit:
                residual = abs(context.evaluate(best_free, 0.0).energy - config.energy)
                if not penalised or residual <= tol_energy or extra >= schedule.extra_stages:
                    break
                extra, stage_start = extra + 1, iteration
                logger.info(f"Restart {index}: residual {residual:.2e}, extra penalty stage {extra}")
        free = adam.step(free, grad)

    final = context.evaluate(best_free, 0.0)
    residual = abs(final.energy - config.energy)
    feasible = bool(np.isfinite(final.error)) and (not penalised or residual <= tol_energy)
    logger.info(f"Restart {index} finished after {iteration} iterations: P_E={final.error:.3e}, "
                f"residual={residual:.2e}, feasible={feasible}")
    return RestartOutcome(index, context.params(best_free).vector(), final.error, final.energy, residual,
                          trace, feasible, context.arch.cutoff, iteration)


def _run_restart_safely(config: TrainConfig, index: int, seed: np.random.SeedSequence,
                        warm: bool) -> RestartOutcome:
    try:
        return run_restart(config, index, seed, warm=warm)
    except (NumericError, LeakageError) as e:
        logger.warning(f"Restart {index} diverged: {e}")
        return RestartOutcome(index, np.zeros(0), math.nan, math.nan, math.inf, [], False,
                              config.architecture.cutoff, 0, str(e))


@dataclass(eq=False)
class TrainResult:
    params: SystemParams
    architecture: Architecture
    error: float
    energy: float
    energy_residual: float
    trace: List[float]
    seed: int
    restart_index: int
    wall_time: float
    restarts: List[Dict[str, Any]]
    validation_error: Optional[float] = None
    task: Optional[TaskSpec] = None

    def to_payload(self) -> Dict[str, Any]:
        """JSON payload; wall time is kept out so reruns are byte-identical"""
        return {
            'error_probability': self.error,
            'energy': self.energy,
            'energy_residual': self.energy_residual,
            'validation_error_probability': self.validation_error,
            'seed': str(self.seed),
            'restart_index': self.restart_index,
            'cutoff': self.architecture.cutoff,
            'restarts': self.restarts,
            'params': self.params.to_dict(self.architecture),
        }

    def trace_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'iteration (count)': np.arange(len(self.trace)),
            'best_merit (probability)': self.trace,
        })


class Trainer(BaseService):
    """Multi-restart minimisation of the penalised error probability"""

    def minimize(self, config: TrainConfig) -> TrainResult:
        started = time.perf_counter()
        ensemble = make_task(config.task)
        if ensemble.data_modes != config.architecture.data_modes:
            raise ConfigError(f"Task has {ensemble.data_modes} data modes, architecture has "
                              f"{config.architecture.data_modes}", 'architecture.data_modes')
        seeds = np.random.SeedSequence(config.seed).spawn(config.restarts)
        warm = [config.initial is not None and i == 0 for i in range(config.restarts)]
        self.log_info(f"Training {config.task.family} at epsilon={config.task.epsilon}, N_S={config.energy} "
                      f"with {config.restarts} restarts")
        if config.workers > 1 and config.restarts > 1:
            with ProcessPoolExecutor(max_workers=min(config.workers, config.restarts)) as pool:
                futures = [pool.submit(_run_restart_safely, config, i, seeds[i], warm[i])
                           for i in range(config.restarts)]
                outcomes = [f.result() for f in futures]
        else:
            outcomes = [_run_restart_safely(config, i, seeds[i], warm[i]) for i in range(config.restarts)]

        feasible = [o for o in outcomes if o.feasible]
        if not feasible:
            raise OptimizationFailure(
                f"All {config.restarts} restarts diverged or stayed infeasible",
                traces=[o.trace for o in outcomes],
            )
        best = min(feasible, key=lambda o: (o.error, o.index))
        arch = config.architecture.with_cutoff(best.cutoff)
        params = SystemParams.from_vector(best.vector, arch)
        if config.noise is not None and not config.noise.is_zero:
            error = noisy_error_probability(ensemble, params, arch, config.noise)
        else:
            error = error_probability(ensemble, params, arch)
        validation = None
        if config.task.family in (CIRCLE, RF_CIRCLE):
            atoms = config.validation_atoms or setting('CIRCLE_VALIDATION_ATOMS', 128)
            validation = error_probability(ensemble.discretize(atoms), params, arch)
        self.log_info(f"Best restart {best.index}: P_E={error:.3e}, residual={best.residual:.2e}")
        return TrainResult(
            params=params,
            architecture=arch,
            error=error,
            energy=best.energy,
            energy_residual=best.residual,
            trace=best.trace,
            seed=config.seed,
            restart_index=best.index,
            wall_time=time.perf_counter() - started,
            restarts=[{'index': o.index, 'error_probability': o.error, 'energy_residual': o.residual,
                       'feasible': o.feasible, 'iterations': o.iterations} for o in outcomes],
            validation_error=validation,
            task=config.task,
        )


def minimize(config: TrainConfig) -> TrainResult:
    return Trainer().minimize(config)


# --- state preparation ----------------------------------------------------

@dataclass(frozen=True)
class FitOptions:
    learning_rate: float = 0.02
    max_iterations: int = 3000
    restarts: int = 4
    target: float = 0.9995
    seed: int = 0


@dataclass
class FitResult:
    params: AnsatzParams
    fidelity: float
    iterations: int


def fit_fock(n: int, arch: Architecture, options: Optional[FitOptions] = None) -> FitResult:
    """Train θ_p so that data mode 0 of the probe carries Fock |n⟩"""
    options = options or FitOptions()
    if not 0 <= n < arch.cutoff - 2:
        raise ContractError(f"Fock level {n} outside the trustworthy range of cutoff {arch.cutoff}")
    start = QuantumState.vacuum(arch.layout).data[:, None]
    dims = arch.layout.dims
    h = setting('FD_STEP', 1e-5)

    def infidelity(vector: np.ndarray) -> float:
        state = apply_ansatz(AnsatzParams.unpack(vector, arch), arch, start)[:, 0]
        probs = (np.abs(state) ** 2).reshape(dims)
        others = tuple(a for a in range(len(dims)) if a != 0)
        return 1.0 - float(probs.sum(axis=others)[n])

    best: Optional[FitResult] = None
    for seed in np.random.SeedSequence(options.seed).spawn(options.restarts):
        rng = np.random.default_rng(seed)
        vector = AnsatzParams.random(arch, rng).pack()
        adam = Adam(options.learning_rate)
        value = infidelity(vector)
        iteration = 0
        for iteration in range(1, options.max_iterations + 1):
            grad = np.empty_like(vector)
            for i in range(vector.size):
                e = np.zeros_like(vector)
                e[i] = h
                grad[i] = (infidelity(vector + e) - infidelity(vector - e)) / (2 * h)
            vector = adam.step(vector, grad)
            value = infidelity(vector)
            if 1.0 - value >= options.target:
                break
        result = FitResult(AnsatzParams.unpack(vector, arch), 1.0 - value, iteration)
        logger.info(f"fit_fock |{n}>: fidelity {result.fidelity:.6f} after {iteration} iterations")
        if best is None or result.fidelity > best.fidelity:
            best = result
        if best.fidelity >= options.target:
            break
    return best


# --- threshold sweeps -----------------------------------------------------

@dataclass
class SweepPoint:
    epsilon: float
    error: float
    energy_residual: float
    result: Optional[TrainResult] = None


@dataclass
class SweepResult:
    points: List[SweepPoint]
    epsilon_th: Optional[float]
    monotone: bool
    bisection: List[SweepPoint] = field(default_factory=list)

    def curve(self) -> pd.DataFrame:
        return pd.DataFrame({
            'epsilon (amplitude)': [p.epsilon for p in self.points],
            'P_E (probability)': [p.error for p in self.points],
        })


def check_monotone_past_threshold(curve: Sequence[Tuple[float, float]], tolerance: Optional[float] = None) -> bool:
    """Once P_E drops below tolerance on an ascending ε grid it stays there"""
    tolerance = tolerance or setting('ZERO_ERROR_TOLERANCE', 1e-8)
    ordered = sorted(curve)
    below = False
    for _, error in ordered:
        if error < tolerance:
            below = True
        elif below:
            return False
    return True


def _train_point(config: TrainConfig, epsilon: float, warm: Optional[SystemParams],
                 task_for: Optional[Callable[[float], TaskSpec]] = None) -> SweepPoint:
    task = task_for(epsilon) if task_for is not None else config.task.replace(epsilon=epsilon)
    point_config = replace(config, task=task, initial=warm if warm is not None else config.initial)
    try:
        result = minimize(point_config)
    except OptimizationFailure as e:
        logger.warning(f"Sweep point epsilon={epsilon} failed: {e}")
        return SweepPoint(epsilon, math.nan, math.inf)
    return SweepPoint(epsilon, result.error, result.energy_residual, result)


def sweep_threshold(config: TrainConfig, grid: Sequence[float], tolerance: Optional[float] = None,
                    width: float = 1e-3, refine: bool = True,
                    task_for: Optional[Callable[[float], TaskSpec]] = None) -> SweepResult:
    """
    Train along an ε grid (ascending, warm-started from the previous point),
    locate the first ε with P_E < tolerance and bisect the bracket down to
    ``width``.

    ``task_for`` builds the task of each grid point when it is not simply
    the configured task at a new ε.
    """
    grid = [float(e) for e in grid]
    if not grid:
        raise ConfigError("Sweep grid is empty", 'sweep.values')
    diffs = np.diff(grid)
    if grid != sorted(grid) and list(reversed(grid)) != sorted(grid) or np.any(diffs == 0):
        raise ConfigError("Sweep grid must be strictly monotone", 'sweep.values')
    tolerance = tolerance or setting('ZERO_ERROR_TOLERANCE', 1e-8)

    points: List[SweepPoint] = []
    warm: Optional[SystemParams] = None
    for epsilon in sorted(grid):
        point = _train_point(config, epsilon, warm, task_for)
        if point.result is not None and config.trainable != 'measurement':
            warm = point.result.params
        points.append(point)
        logger.info(f"Sweep epsilon={epsilon:.4f}: P_E={point.error:.3e}")

    epsilon_th = None
    bisection: List[SweepPoint] = []
    passing = [i for i, p in enumerate(points) if p.error < tolerance]
    if passing:
        i = passing[0]
        epsilon_th = points[i].epsilon
        if refine and i > 0:
            lo, hi = points[i - 1].epsilon, points[i].epsilon
            warm = points[i].result.params
            while hi - lo > width:
                mid = 0.5 * (lo + hi)
                point = _train_point(config, mid, warm, task_for)
                bisection.append(point)
                logger.info(f"Bisection [{lo:.4f}, {hi:.4f}] at {mid:.4f}: P_E={point.error:.3e}")
                if point.error < tolerance:
                    hi = mid
                    warm = point.result.params
                else:
                    lo = mid
            epsilon_th = hi
    else:
        logger.info("No threshold found in the sweep range")

    monotone = check_monotone_past_threshold([(p.epsilon, p.error) for p in points], tolerance)
    return SweepResult(points, epsilon_th, monotone, bisection)
